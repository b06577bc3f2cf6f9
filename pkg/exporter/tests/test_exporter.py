import csv
import warnings

import numpy as np
import pytest
from gexnet.descriptors import load_descriptor_table

from clsembed.cli import main
from clsembed.exporter import ExportError, export_embeddings, read_smiles_list

TEN_SMILES = ["C", "CC", "CCO", "CCC", "CO", "CN", "CCN", "OCO",
              "c1ccccc1", "CCCl"]


def _write_list(path, items):
    path.write_text("\n".join(items) + "\n", encoding="utf-8")
    return path


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_read_smiles_list_strips_and_dedupes(tmp_path):
    p = tmp_path / "list.txt"
    p.write_text("  CCO \n\nCC\nCCO\n   \nC\n", encoding="utf-8")
    assert read_smiles_list(p) == ["CCO", "CC", "C"]


def test_read_smiles_list_empty_errors(tmp_path):
    p = tmp_path / "list.txt"
    p.write_text("\n   \n\n", encoding="utf-8")
    with pytest.raises(ExportError, match="no SMILES"):
        read_smiles_list(p)


def test_max_tokens_validated_before_model_load(tmp_path):
    p = _write_list(tmp_path / "list.txt", ["CCO"])
    with pytest.raises(ExportError, match="max_tokens"):
        export_embeddings(p, tmp_path / "out.csv",
                          model_ref=str(tmp_path / "missing"), max_tokens=0)


def test_export_writes_loadable_table(tmp_path, model_dir):
    p = _write_list(tmp_path / "list.txt", TEN_SMILES)
    out = tmp_path / "desc.csv"
    result = export_embeddings(p, out, model_ref=model_dir)
    assert (result.n_written, result.n_skipped, result.dim) == (10, 0, 384)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = load_descriptor_table(out)
    assert caught == []
    assert table.dim == 384
    assert len(table) == 10
    assert table.source == "77M-MTR"
    assert table.smiles == TEN_SMILES
    for s in TEN_SMILES:
        vec = table[s]
        assert vec.shape == (384,)
        assert np.all(np.isfinite(vec))


def test_rows_are_exactly_384_wide(tmp_path, model_dir):
    p = _write_list(tmp_path / "list.txt", TEN_SMILES)
    out = tmp_path / "desc.csv"
    export_embeddings(p, out, model_ref=model_dir)
    rows = _read_rows(out)
    assert rows[0] == ["smiles", "dim=384", "source=77M-MTR"]
    assert [r[0] for r in rows[1:]] == TEN_SMILES
    assert all(len(r) == 1 + 384 for r in rows[1:])


def test_export_deterministic_across_runs(tmp_path, model_dir):
    p = _write_list(tmp_path / "list.txt", TEN_SMILES)
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    export_embeddings(p, out_a, model_ref=model_dir)
    export_embeddings(p, out_b, model_ref=model_dir)
    assert out_a.read_bytes() == out_b.read_bytes()


def test_repeated_smiles_collapse_to_one_identical_row(tmp_path, model_dir):
    p = _write_list(tmp_path / "dup.txt", ["CCO", "CC", "CCO", "C"])
    out = tmp_path / "dup.csv"
    result = export_embeddings(p, out, model_ref=model_dir)
    assert result.n_written == 3
    table = load_descriptor_table(out)
    assert table.smiles == ["CCO", "CC", "C"]

    solo = tmp_path / "solo.csv"
    export_embeddings(_write_list(tmp_path / "solo.txt", ["CCO"]), solo,
                      model_ref=model_dir)
    assert np.array_equal(table["CCO"], load_descriptor_table(solo)["CCO"])


def test_overflow_row_skipped_with_warning(tmp_path, model_dir):
    p = _write_list(tmp_path / "list.txt", ["CCO", "C" * 130, "CCN"])
    out = tmp_path / "desc.csv"
    with pytest.warns(UserWarning, match="132 tokens exceeds the 128-token"):
        result = export_embeddings(p, out, model_ref=model_dir)
    assert (result.n_written, result.n_skipped) == (2, 1)
    assert load_descriptor_table(out).smiles == ["CCO", "CCN"]


def test_token_limit_boundary(tmp_path, model_dir):
    # "CCO" encodes to 5 tokens including the two special tokens, "C" to 3
    p = _write_list(tmp_path / "list.txt", ["CCO", "C"])
    keep = tmp_path / "keep.csv"
    result = export_embeddings(p, keep, model_ref=model_dir, max_tokens=5)
    assert (result.n_written, result.n_skipped) == (2, 0)
    trim = tmp_path / "trim.csv"
    with pytest.warns(UserWarning, match="5 tokens exceeds the 4-token"):
        result = export_embeddings(p, trim, model_ref=model_dir, max_tokens=4)
    assert (result.n_written, result.n_skipped) == (1, 1)
    assert load_descriptor_table(trim).smiles == ["C"]


def test_every_row_overflowing_errors(tmp_path, model_dir):
    p = _write_list(tmp_path / "list.txt", ["C" * 130])
    with pytest.warns(UserWarning, match="exceeds"):
        with pytest.raises(ExportError, match="nothing to export"):
            export_embeddings(p, tmp_path / "out.csv", model_ref=model_dir)


def test_unloadable_model_errors(tmp_path):
    p = _write_list(tmp_path / "list.txt", ["CCO"])
    with pytest.raises(ExportError, match="cannot load model"):
        export_embeddings(p, tmp_path / "out.csv",
                          model_ref=str(tmp_path / "missing"))


def test_cli_end_to_end(tmp_path, model_dir, capsys):
    p = _write_list(tmp_path / "list.txt", TEN_SMILES)
    out = tmp_path / "desc.csv"
    rc = main(["--smiles-file", str(p), "--out", str(out),
               "--model", model_dir])
    assert rc == 0
    assert capsys.readouterr().out == (
        f"exported 10 embeddings (dim 384) to {out}\n"
    )
    assert len(load_descriptor_table(out)) == 10


def test_cli_custom_source_tag_and_limit(tmp_path, model_dir, capsys):
    p = _write_list(tmp_path / "list.txt", ["CCO", "C" * 130])
    out = tmp_path / "desc.csv"
    with pytest.warns(UserWarning, match="exceeds"):
        rc = main(["--smiles-file", str(p), "--out", str(out),
                   "--model", model_dir, "--source-tag", "tiny-test"])
    assert rc == 0
    assert "skipped 1" in capsys.readouterr().out
    assert load_descriptor_table(out).source == "tiny-test"


def test_cli_model_load_failure_is_nonzero(tmp_path, capsys):
    p = _write_list(tmp_path / "list.txt", ["CCO"])
    rc = main(["--smiles-file", str(p), "--out", str(tmp_path / "o.csv"),
               "--model", str(tmp_path / "missing")])
    assert rc == 1
    assert "error: cannot load model" in capsys.readouterr().err


def test_cli_missing_smiles_file(tmp_path, capsys):
    rc = main(["--smiles-file", str(tmp_path / "absent.txt"),
               "--out", str(tmp_path / "o.csv")])
    assert rc == 3
    assert "I/O error" in capsys.readouterr().err


def test_cli_requires_arguments():
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == 2
