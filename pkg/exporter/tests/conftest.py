import pytest
import torch
from tokenizers import Regex, Tokenizer, models, pre_tokenizers, processors
from transformers import PreTrainedTokenizerFast, RobertaConfig, RobertaModel

HIDDEN = 384


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    """A small local encoder directory with the production embedding
    width: character-level tokenizer plus a two-layer 384-wide encoder,
    saved once and loaded by every test through the standard auto
    classes."""
    d = tmp_path_factory.mktemp("encoder")
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    chars = sorted(set("BCNOPSFIHclnos()[]=#+-0123456789%/\\.r@"))
    vocab = {t: i for i, t in enumerate(specials + chars)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Split(Regex("."), behavior="isolated")
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]",
    )
    fast.save_pretrained(d)
    torch.manual_seed(0)
    config = RobertaConfig(
        vocab_size=len(vocab), hidden_size=HIDDEN, num_hidden_layers=2,
        num_attention_heads=4, intermediate_size=128,
        max_position_embeddings=160, pad_token_id=vocab["[PAD]"],
        bos_token_id=vocab["[CLS]"], eos_token_id=vocab["[SEP]"],
    )
    RobertaModel(config).save_pretrained(d)
    return str(d)
