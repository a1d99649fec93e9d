"""Embedding container, manifests, splits, and the synthetic generator's
planted-correspondence guarantees."""

import numpy as np
import pytest

from dtv.corpus import (
    CorpusManifest,
    SyntheticConfig,
    generate_synthetic,
    read_embeddings,
    split_corpus,
    write_embeddings,
)
from dtv.evaluation import compute_ranks, recall_at_k


def tiny_config(**overrides):
    base = dict(num_train=12, num_val=6, num_test=6, frames=3, turns=4,
                dim=8, latent_dim=6)
    base.update(overrides)
    return SyntheticConfig(**base)


# -- container ----------------------------------------------------------------

def test_container_round_trip_is_bit_exact_at_float32(tmp_path):
    rng = np.random.default_rng(0)
    records = [
        ("vid-a", rng.standard_normal((3, 5)).astype(np.float32).astype(np.float64)),
        ("vid-b", rng.standard_normal((1, 5)).astype(np.float32).astype(np.float64)),
        ("vid-é", rng.standard_normal((4, 5)).astype(np.float32).astype(np.float64)),
    ]
    path = tmp_path / "e.bin"
    write_embeddings(path, records)
    loaded = read_embeddings(path)
    assert [rid for rid, _ in loaded] == [rid for rid, _ in records]
    for (_, want), (_, got) in zip(records, loaded):
        assert np.array_equal(want, got)


def test_container_empty_file_round_trips(tmp_path):
    path = tmp_path / "empty.bin"
    write_embeddings(path, [], dim=16)
    assert read_embeddings(path) == []


def test_container_empty_without_dim_is_rejected(tmp_path):
    with pytest.raises(ValueError, match="dim"):
        write_embeddings(tmp_path / "e.bin", [])


def test_container_rejects_corrupted_magic(tmp_path):
    path = tmp_path / "e.bin"
    write_embeddings(path, [("a", np.zeros((1, 2)))])
    blob = path.read_bytes()
    path.write_bytes(b"ZZZZ" + blob[4:])
    with pytest.raises(ValueError, match="bad magic"):
        read_embeddings(path)


def test_container_rejects_truncation(tmp_path):
    path = tmp_path / "e.bin"
    write_embeddings(path, [("a", np.ones((2, 3))), ("b", np.ones((2, 3)))])
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 5])
    with pytest.raises(ValueError, match="truncated"):
        read_embeddings(path)


def test_container_rejects_trailing_garbage(tmp_path):
    path = tmp_path / "e.bin"
    write_embeddings(path, [("a", np.ones((1, 2)))])
    path.write_bytes(path.read_bytes() + b"\x01")
    with pytest.raises(ValueError, match="trailing"):
        read_embeddings(path)


def test_container_rejects_dim_mismatch_on_write(tmp_path):
    with pytest.raises(ValueError, match="expected"):
        write_embeddings(tmp_path / "e.bin",
                         [("a", np.ones((1, 3))), ("b", np.ones((1, 4)))])


# -- generator -----------------------------------------------------------------

def test_generator_is_byte_deterministic(tmp_path):
    config = tiny_config()
    generate_synthetic(config, seed=5, out_dir=tmp_path / "a")
    generate_synthetic(config, seed=5, out_dir=tmp_path / "b")
    for name in ("manifest.json", "train.videos.dtve", "train.dialogues.dtve",
                 "val.videos.dtve", "test.dialogues.dtve"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generator_seeds_produce_different_corpora(tmp_path):
    config = tiny_config()
    generate_synthetic(config, seed=1, out_dir=tmp_path / "a")
    generate_synthetic(config, seed=2, out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "train.videos.dtve").read_bytes()
    b = (tmp_path / "b" / "train.videos.dtve").read_bytes()
    assert a != b


def test_manifest_round_trip_and_split_loading(tmp_path):
    manifest = generate_synthetic(tiny_config(), seed=3, out_dir=tmp_path)
    reloaded = CorpusManifest.load(tmp_path / "manifest.json")
    assert reloaded.counts == manifest.counts
    assert reloaded.embedding_dim == manifest.embedding_dim
    videos, dialogues = reloaded.load_split("val")
    assert len(videos) == len(dialogues) == 6
    assert {v.video_id for v in videos} == {q.query_id for q in dialogues}
    assert all(v.frames.shape == (3, 8) for v in videos)
    assert all(q.turns.shape == (4, 8) for q in dialogues)
    with pytest.raises(ValueError, match="no split"):
        reloaded.load_split("holdout")


def test_manifest_loads_from_corpus_directory(tmp_path):
    generate_synthetic(tiny_config(), seed=3, out_dir=tmp_path)
    from_dir = CorpusManifest.load(tmp_path)
    from_file = CorpusManifest.load(tmp_path / "manifest.json")
    assert from_dir == from_file


def test_split_ids_are_disjoint(tmp_path):
    manifest = generate_synthetic(tiny_config(), seed=4, out_dir=tmp_path)
    seen = set()
    for split in ("train", "val", "test"):
        videos, _ = manifest.load_split(split)
        ids = {v.video_id for v in videos}
        assert not (ids & seen)
        seen |= ids


def test_noiseless_single_turn_reveal_gives_perfect_raw_retrieval(tmp_path):
    config = tiny_config(noise_sigma=0.0, information_fractions=(1.0,),
                         turns=1, query_scale=1.0)
    manifest = generate_synthetic(config, seed=6, out_dir=tmp_path)
    videos, dialogues = manifest.load_split("test")
    ids = [v.video_id for v in videos]
    frames = np.stack([v.frames.mean(axis=0) for v in videos])
    queries = np.stack([q.turns[-1] for q in dialogues])
    scores = queries @ frames.T
    gold = [ids.index(q.query_id) for q in dialogues]
    ranks = compute_ranks(scores, gold, ids)
    assert recall_at_k(ranks, 1) == 1.0


def test_default_corpus_raw_baseline_beats_ten_times_chance(tmp_path):
    config = SyntheticConfig(num_train=4, num_val=4, num_test=100)
    assert config.noise_sigma <= config.baseline_noise_threshold()
    manifest = generate_synthetic(config, seed=7, out_dir=tmp_path)
    videos, dialogues = manifest.load_split("test")
    ids = [v.video_id for v in videos]
    frames = np.stack([v.frames.mean(axis=0) for v in videos])
    queries = np.stack([q.turns[-1] for q in dialogues])
    ranks = compute_ranks(queries @ frames.T, [ids.index(q.query_id) for q in dialogues], ids)
    chance = 1.0 / len(videos)
    assert recall_at_k(ranks, 1) > 10 * chance


def test_prefix_cosine_alignment_strictly_grows_with_turns(tmp_path):
    """Later prefixes reveal more of the video's latent vector, so their
    cosine alignment with the video signal must strictly increase."""
    manifest = generate_synthetic(SyntheticConfig(num_train=4, num_val=4, num_test=334),
                                  seed=8, out_dir=tmp_path)
    videos, dialogues = manifest.load_split("test")
    by_id = {v.video_id: v for v in videos}
    means = []
    for t in range(manifest.turns):
        cosines = []
        for q in dialogues:
            signal = by_id[q.query_id].frames.mean(axis=0)
            row = q.turns[t]
            cosines.append(row @ signal / (np.linalg.norm(row) * np.linalg.norm(signal)))
        means.append(np.mean(cosines))
    assert all(means[i + 1] > means[i] for i in range(len(means) - 1)), means


def test_per_turn_mode_rows_carry_disjoint_slices(tmp_path):
    config = tiny_config(dialogue_mode="per_turn", noise_sigma=0.0,
                         information_fractions=(0.5, 0.5), turns=2, query_scale=1.0)
    manifest = generate_synthetic(config, seed=9, out_dir=tmp_path)
    _, dialogues = manifest.load_split("test")
    # the two turn embeddings reveal complementary halves: their latent
    # preimages are orthogonal, and orthonormal projection preserves that
    # up to the container's float32 storage precision
    for q in dialogues:
        assert abs(q.turns[0] @ q.turns[1]) < 1e-6


def test_degenerate_zero_signal_config_warns(tmp_path):
    config = tiny_config(information_fractions=(0.0, 0.0), noise_sigma=1.0)
    with pytest.warns(UserWarning, match="no signal"):
        generate_synthetic(config, seed=10, out_dir=tmp_path)


def test_config_validation():
    with pytest.raises(ValueError, match="latent_dim"):
        tiny_config(latent_dim=9)  # exceeds dim=8
    with pytest.raises(ValueError, match="noise_sigma"):
        tiny_config(noise_sigma=-0.1)
    with pytest.raises(ValueError, match="sum to"):
        tiny_config(information_fractions=(0.8, 0.8))
    with pytest.raises(ValueError, match="fractions"):
        tiny_config(information_fractions=(0.2,) * 5)  # more than turns=4
    with pytest.raises(ValueError, match="split"):
        tiny_config(num_val=0)


def test_default_fraction_schedule_is_front_loaded_and_complete():
    config = SyntheticConfig()
    fractions = config.fractions()
    assert len(fractions) == 10
    assert abs(sum(fractions) - 1.0) < 1e-12
    assert all(fractions[i] > fractions[i + 1] for i in range(9))
    slices = config.turn_slices()
    assert all(s.stop > s.start for s in slices)  # every turn reveals something
    assert slices[-1].stop == config.latent_dim


# -- split_corpus ---------------------------------------------------------------

def test_split_matches_published_corpus_shape():
    ids = [f"vid{i:05d}" for i in range(9848)]
    explicit = {
        "train": ids[:7985],
        "val": ids[7985:7985 + 863],
        "test": ids[7985 + 863:],
    }
    split = split_corpus(ids, explicit=explicit)
    assert (len(split["train"]), len(split["val"]), len(split["test"])) == (7985, 863, 1000)


def test_split_ratio_all_train():
    ids = [f"v{i}" for i in range(50)]
    split = split_corpus(ids, ratios=(1.0, 0.0, 0.0), seed=1)
    assert sorted(split["train"]) == sorted(ids)
    assert split["val"] == [] and split["test"] == []


def test_split_is_seed_deterministic():
    ids = [f"v{i}" for i in range(100)]
    a = split_corpus(ids, ratios=(0.8, 0.1, 0.1), seed=3)
    b = split_corpus(ids, ratios=(0.8, 0.1, 0.1), seed=3)
    c = split_corpus(ids, ratios=(0.8, 0.1, 0.1), seed=4)
    assert a == b
    assert a != c


def test_split_partitions_exactly():
    ids = [f"v{i}" for i in range(97)]
    split = split_corpus(ids, ratios=(0.7, 0.2, 0.1), seed=5)
    merged = split["train"] + split["val"] + split["test"]
    assert sorted(merged) == sorted(ids)


def test_split_rejects_overlap_and_unknown_ids():
    ids = ["a", "b", "c", "d"]
    with pytest.raises(ValueError, match="more than one split"):
        split_corpus(ids, explicit={"train": ["a", "b"], "val": ["b"]})
    with pytest.raises(ValueError, match="not in the corpus"):
        split_corpus(ids, explicit={"train": ["a"], "val": ["z"]})
    with pytest.raises(ValueError, match="unique"):
        split_corpus(["a", "a"], ratios=(1.0, 0.0, 0.0))
