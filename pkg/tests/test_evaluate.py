"""Evaluation pipeline tests on small untrained models: report schemas,
sweep determinism, and error paths (BLEU math itself is in test_bleu)."""

import csv

import numpy as np
import pytest

from promptmt.errors import ConfigError
from promptmt.evaluate import (EvalReport, evaluate, mask_sweep,
                               parse_direction, write_report_csv,
                               write_sentences_tsv, write_sweep_csv)
from promptmt.model import ModelConfig, MultimodalTranslator
from promptmt.text import load_manifest
from promptmt.toydata import make_toy_corpus, train_toy_vocab


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("evalws")
    manifest_path = make_toy_corpus(root, n_lines=4, target_langs=("de", "fr"),
                                    d_v=8, m_v=2, n_images=2)
    manifest = load_manifest(manifest_path)
    vocab = train_toy_vocab(root, manifest.languages, vocab_size=330)
    return manifest, vocab


def small_model(vocab, variant="full"):
    cfg = ModelConfig(vocab_size=len(vocab), d_model=16, n_heads=2,
                      n_enc_layers=1, n_dec_layers=1,
                      d_v=0 if variant == "text_only" else 8,
                      variant=variant, dropout=0.0, eps_ls=0.1)
    return MultimodalTranslator(cfg, seed=2)


def test_parse_direction_forms():
    assert parse_direction("en-de") == ("en", "de")
    assert parse_direction("En-De") == ("en", "de")
    assert parse_direction("en->fr") == ("en", "fr")
    with pytest.raises(ConfigError):
        parse_direction("ende")


def test_report_schema_identical_across_variants(workspace):
    manifest, vocab = workspace
    reports = {}
    for variant in ("full", "text_only"):
        rep = evaluate(small_model(vocab, variant), vocab, manifest, "en-de",
                       beam=2)
        reports[variant] = rep
        assert rep.direction == "en-de"
        assert 0.0 <= rep.bleu <= 100.0
        assert len(rep.sentences) == 4
        for s in rep.sentences:
            assert s.example_id and s.reference
    assert ({f.name for f in type(reports["full"]).__dataclass_fields__.values()}
            == {f.name for f in type(reports["text_only"]).__dataclass_fields__.values()})


def test_evaluate_deterministic(workspace):
    manifest, vocab = workspace
    model = small_model(vocab)
    r1 = evaluate(model, vocab, manifest, "en-de", beam=2)
    r2 = evaluate(model, vocab, manifest, "en-de", beam=2)
    assert r1.bleu == r2.bleu
    assert [s.hypothesis for s in r1.sentences] == \
        [s.hypothesis for s in r2.sentences]


def test_mask_sweep_ratio_zero_matches_plain_evaluate(workspace):
    manifest, vocab = workspace
    model = small_model(vocab)
    plain = evaluate(model, vocab, manifest, "en-de", beam=2)
    reports, summary = mask_sweep(model, vocab, manifest, "en-de",
                                  ratios=[0.0], seeds=[1, 2, 3], beam=2)
    assert summary[0]["mean_bleu"] == plain.bleu
    assert summary[0]["std"] == 0.0
    assert [s.hypothesis for s in reports[0].sentences] == \
        [s.hypothesis for s in plain.sentences]


def test_mask_sweep_deterministic_csv(workspace, tmp_path):
    manifest, vocab = workspace
    model = small_model(vocab)
    outs = []
    for run in range(2):
        _, summary = mask_sweep(model, vocab, manifest, "en-de",
                                ratios=[0.0, 0.5], seeds=[1, 2], beam=2)
        path = tmp_path / f"sweep{run}.csv"
        write_sweep_csv(path, summary)
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    header = outs[0].splitlines()[0]
    assert header == "ratio,mean_bleu,std"


def test_masked_sources_shown_in_dump(workspace, tmp_path):
    manifest, vocab = workspace
    model = small_model(vocab)
    rep = evaluate(model, vocab, manifest, "en-de", beam=2, mask_ratio=1.0,
                   mask_seed=3)
    assert all("<mask>" in s.source for s in rep.sentences)
    path = tmp_path / "dump.tsv"
    write_sentences_tsv(path, rep)
    lines = path.read_text().splitlines()
    assert lines[0] == "example_id\tsource\thypothesis\treference"
    assert len(lines) == 5


def test_report_csv_schema(workspace, tmp_path):
    manifest, vocab = workspace
    model = small_model(vocab)
    plain = evaluate(model, vocab, manifest, "en-de", beam=2)
    masked = evaluate(model, vocab, manifest, "en-fr", beam=2,
                      mask_ratio=0.5, mask_seed=9)
    path = tmp_path / "report.csv"
    write_report_csv(path, [plain, masked])
    rows = list(csv.DictReader(path.open()))
    assert rows[0]["direction"] == "en-de" and rows[0]["ratio"] == ""
    assert rows[1]["ratio"] == "0.5" and rows[1]["seed"] == "9"
    assert float(rows[0]["bleu"]) == pytest.approx(plain.bleu, abs=1e-4)


def test_missing_vtok_entries_error(workspace, tmp_path):
    manifest, vocab = workspace
    model = small_model(vocab)
    import shutil

    broken_dir = tmp_path / "broken"
    shutil.copytree(manifest.text_paths["en"].parent, broken_dir)
    from promptmt.vision import VisualTokens, write_vtok
    write_vtok([VisualTokens("unrelated", np.zeros((2, 8), np.float32))],
               broken_dir / "train.vtok")
    broken = load_manifest(broken_dir / "train.json")
    with pytest.raises(ConfigError, match="no visual tokens"):
        evaluate(model, vocab, broken, "en-de", beam=1)


def test_eval_report_rejects_out_of_range_bleu():
    with pytest.raises(ConfigError, match="range"):
        EvalReport(direction="en-de", bleu=101.0, sentences=[])
