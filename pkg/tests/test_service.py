"""Index lifecycle, embedding providers, HTTP session contract, and
online/offline score consistency."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

import dtv.service as service
from dtv.corpus import SyntheticConfig, generate_synthetic
from dtv.model import DialogueQuery, ModelConfig, ModelParams, encode_query, score_matrix
from dtv.service import (
    HashingStubProvider,
    HttpEmbeddingProvider,
    ProviderError,
    build_index,
    create_app,
    load_index,
)

DIM = 8


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    """A small corpus, a saved (untrained but non-trivial) checkpoint, and
    an index built from it."""
    root = tmp_path_factory.mktemp("service")
    config = SyntheticConfig(num_train=4, num_val=4, num_test=12, frames=3,
                             turns=4, dim=DIM, latent_dim=6, query_scale=4.0)
    manifest = generate_synthetic(config, seed=0, out_dir=root / "corpus")
    videos, queries = manifest.load_split("test")

    params = ModelParams.initialize(
        ModelConfig(dim=DIM, max_frames=3, num_layers=1, num_heads=2), seed=0
    )
    rng = np.random.default_rng(1)
    params["query_proj.weight"].data[:] = 0.4 * rng.standard_normal((DIM, DIM))
    ckpt = root / "model.ckpt"
    params.save(ckpt)
    loaded = ModelParams.load(ckpt)

    index = build_index(loaded, ckpt, videos, root / "index", max_turns=4)
    return {"root": root, "manifest": manifest, "videos": videos,
            "queries": queries, "params": loaded, "ckpt": ckpt, "index": index}


@pytest.fixture()
def client(world):
    app = create_app(world["params"], world["index"],
                     provider=HashingStubProvider(dim=DIM))
    return TestClient(app)


# -- providers ----------------------------------------------------------------

def test_stub_provider_is_deterministic_across_instances():
    a = HashingStubProvider(dim=16).embed(["hello", "world"])
    b = HashingStubProvider(dim=16).embed(["hello", "world"])
    assert np.array_equal(a, b)
    assert a.shape == (2, 16)
    assert not np.array_equal(a[0], a[1])


def test_stub_provider_rejects_bad_dim():
    with pytest.raises(ValueError, match="positive"):
        HashingStubProvider(dim=0)


def test_http_provider_wraps_connection_failures():
    provider = HttpEmbeddingProvider("http://127.0.0.1:9", timeout=0.2)
    with pytest.raises(ProviderError, match="failed"):
        provider.embed(["text"])


def test_http_provider_rejects_malformed_payload(monkeypatch):
    class FakeResponse:
        def raise_for_status(self):
            pass

        def json(self):
            return {"embeddings": [[1.0, 2.0]]}

    import httpx
    monkeypatch.setattr(httpx, "post", lambda *a, **k: FakeResponse())
    provider = HttpEmbeddingProvider("http://stub")
    with pytest.raises(ProviderError, match="wrong length"):
        provider.embed(["a", "b"])


# -- index ----------------------------------------------------------------------

def test_index_round_trip(world):
    loaded = load_index(world["root"] / "index", checkpoint_path=world["ckpt"])
    assert loaded.video_ids == world["index"].video_ids
    assert loaded.max_turns == 4
    for vid in loaded.video_ids:
        assert np.array_equal(loaded.matrices[vid], world["index"].matrices[vid])


def test_index_rebuild_is_byte_identical(world, tmp_path):
    build_index(world["params"], world["ckpt"], world["videos"], tmp_path / "i1",
                max_turns=4)
    build_index(world["params"], world["ckpt"], world["videos"], tmp_path / "i2",
                max_turns=4)
    for name in ("index.json", "temporal.bin"):
        assert (tmp_path / "i1" / name).read_bytes() == (tmp_path / "i2" / name).read_bytes()


def test_index_refuses_foreign_checkpoint(world, tmp_path):
    other = ModelParams.initialize(
        ModelConfig(dim=DIM, max_frames=3, num_layers=1, num_heads=2), seed=9
    )
    other_ckpt = tmp_path / "other.ckpt"
    other.save(other_ckpt)
    with pytest.raises(ValueError, match="different checkpoint"):
        load_index(world["root"] / "index", checkpoint_path=other_ckpt)


def test_index_detects_truncated_cache(world, tmp_path):
    import shutil
    shutil.copytree(world["root"] / "index", tmp_path / "broken")
    cache = tmp_path / "broken" / "temporal.bin"
    cache.write_bytes(cache.read_bytes()[:-9])
    with pytest.raises(ValueError, match="truncated"):
        load_index(tmp_path / "broken")


def test_build_index_rejects_empty_video_list(world, tmp_path):
    with pytest.raises(ValueError, match="empty"):
        build_index(world["params"], world["ckpt"], [], tmp_path / "empty")


# -- http contract -----------------------------------------------------------------

def test_info_endpoint_reports_corpus_shape(client, world):
    info = client.get("/").json()
    assert info["num_videos"] == 12
    assert info["embedding_dim"] == DIM
    assert info["max_turns"] == 4
    assert info["checkpoint_sha256"] == world["index"].checkpoint_sha256


def test_session_lifecycle(client):
    created = client.post("/sessions", json={})
    assert created.status_code == 201
    sid = created.json()["session_id"]

    turn = client.post(f"/sessions/{sid}/turns",
                       json={"embedding": [0.1] * DIM})
    assert turn.status_code == 200
    assert turn.json()["turn_index"] == 1

    ranking = client.get(f"/sessions/{sid}/ranking", params={"k": 5})
    assert ranking.status_code == 200
    body = ranking.json()
    assert body["num_turns"] == 1
    assert len(body["results"]) == 5
    scores = [r["score"] for r in body["results"]]
    assert scores == sorted(scores, reverse=True)
    assert [r["rank"] for r in body["results"]] == [1, 2, 3, 4, 5]

    deleted = client.delete(f"/sessions/{sid}")
    assert deleted.status_code == 200
    assert client.get(f"/sessions/{sid}/ranking").status_code == 404


def test_session_refetch_restores_transcript(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    client.post(f"/sessions/{sid}/turns", json={"text": "a red door"})
    client.post(f"/sessions/{sid}/turns", json={"text": "it opens"})
    state = client.get(f"/sessions/{sid}")
    assert state.status_code == 200
    body = state.json()
    assert body["num_turns"] == 2
    assert body["texts"] == ["a red door", "it opens"]


def test_session_refetch_hides_texts_for_embedding_turns(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    client.post(f"/sessions/{sid}/turns", json={"embedding": [0.1] * DIM})
    body = client.get(f"/sessions/{sid}").json()
    assert body["num_turns"] == 1
    assert body["texts"] is None


def test_unknown_session_is_404(client):
    assert client.post("/sessions/nope/turns",
                       json={"embedding": [0.0] * DIM}).status_code == 404
    assert client.get("/sessions/nope").status_code == 404
    assert client.get("/sessions/nope/ranking").status_code == 404
    assert client.get("/sessions/nope/attention/test-0000").status_code == 404
    assert client.delete("/sessions/nope").status_code == 404


def test_turn_validation_errors(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    url = f"/sessions/{sid}/turns"
    assert client.post(url, json={}).status_code == 400
    assert client.post(url, json={"text": "hi", "embedding": [0.0] * DIM}).status_code == 400
    assert client.post(url, json={"embedding": [0.0] * (DIM - 1)}).status_code == 400
    assert client.post(url, json={"text": "   "}).status_code == 400


def test_ranking_requires_a_turn_first(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    response = client.get(f"/sessions/{sid}/ranking")
    assert response.status_code == 400
    assert "at least one turn" in response.json()["detail"]
    assert client.get(f"/sessions/{sid}/attention/test-0000").status_code == 400


def test_turn_limit_enforced_with_409(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    for i in range(4):
        assert client.post(f"/sessions/{sid}/turns",
                           json={"embedding": [float(i)] * DIM}).status_code == 200
    overflow = client.post(f"/sessions/{sid}/turns", json={"embedding": [9.0] * DIM})
    assert overflow.status_code == 409


def test_text_turn_without_provider_is_503(world):
    app = create_app(world["params"], world["index"], provider=None)
    bare = TestClient(app)
    sid = bare.post("/sessions", json={}).json()["session_id"]
    assert bare.post(f"/sessions/{sid}/turns", json={"text": "hi"}).status_code == 503


def test_failing_provider_surfaces_as_503(world):
    class DownProvider:
        def embed(self, texts):
            raise ProviderError("backend offline")

    app = create_app(world["params"], world["index"], provider=DownProvider())
    down = TestClient(app)
    sid = down.post("/sessions", json={}).json()["session_id"]
    response = down.post(f"/sessions/{sid}/turns", json={"text": "hi"})
    assert response.status_code == 503
    # failed turn must not be recorded
    assert down.get(f"/sessions/{sid}/ranking").status_code == 400


def test_mode_conflict_rejected_at_creation(client):
    response = client.post("/sessions", json={"mode": "per_turn"})
    assert response.status_code == 400
    assert "conflicts" in response.json()["detail"]


def test_mixing_text_after_raw_embeddings_is_rejected(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    client.post(f"/sessions/{sid}/turns", json={"embedding": [0.5] * DIM})
    response = client.post(f"/sessions/{sid}/turns", json={"text": "now text"})
    assert response.status_code == 400


def test_attention_weights_sum_to_one(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    client.post(f"/sessions/{sid}/turns", json={"embedding": [0.3] * DIM})
    top = client.get(f"/sessions/{sid}/ranking", params={"k": 1}).json()
    vid = top["results"][0]["video_id"]
    body = client.get(f"/sessions/{sid}/attention/{vid}").json()
    assert len(body["weights"]) == 3  # one weight per frame
    assert sum(body["weights"]) == pytest.approx(1.0, abs=1e-6)
    assert client.get(f"/sessions/{sid}/attention/ghost").status_code == 404


def test_text_sessions_embed_the_growing_prefix(world):
    """In cumulative mode the service embeds the concatenated text so far,
    so a session's row i must equal the stub's embedding of turns 1..i."""
    provider = HashingStubProvider(dim=DIM)
    app = create_app(world["params"], world["index"], provider=provider)
    tc = TestClient(app)
    sid = tc.post("/sessions", json={}).json()["session_id"]
    tc.post(f"/sessions/{sid}/turns", json={"text": "a man opens"})
    tc.post(f"/sessions/{sid}/turns", json={"text": "a wooden door"})
    online = tc.get(f"/sessions/{sid}/ranking", params={"k": 12}).json()

    rows = provider.embed(["a man opens", "a man opens a wooden door"])
    query = DialogueQuery("replay", rows)
    d_h = encode_query(query, world["params"]).data[0]
    from dtv.model import pool_video
    want = {vid: pool_video(d_h, world["index"].matrices[vid], world["params"]).score
            for vid in world["index"].video_ids}
    for result in online["results"]:
        assert result["score"] == pytest.approx(want[result["video_id"]], abs=1e-12)


def test_online_ranking_matches_offline_batch_scores(client, world):
    """Replayed sessions: posting a query's prefix rows turn by turn must
    reproduce offline score_matrix results at every round."""
    params = world["params"]
    videos = world["videos"]
    ordered_ids = [v.video_id for v in videos]
    for query in world["queries"][:4]:
        sid = client.post("/sessions", json={}).json()["session_id"]
        for r in range(1, query.num_turns + 1):
            row = query.turns[r - 1]
            client.post(f"/sessions/{sid}/turns", json={"embedding": row.tolist()})
            online = client.get(f"/sessions/{sid}/ranking",
                                params={"k": len(videos)}).json()
            offline = score_matrix([query], videos, params, rounds=r).data[0]
            by_id = dict(zip(ordered_ids, offline))
            for result in online["results"]:
                assert result["score"] == pytest.approx(
                    by_id[result["video_id"]], abs=1e-6)


def test_sessions_are_isolated(client):
    rng = np.random.default_rng(3)
    turns_a = [rng.standard_normal(DIM).tolist() for _ in range(2)]
    turns_b = [rng.standard_normal(DIM).tolist() for _ in range(2)]

    # serial reference
    sid = client.post("/sessions", json={}).json()["session_id"]
    for t in turns_a:
        client.post(f"/sessions/{sid}/turns", json={"embedding": t})
    serial_a = client.get(f"/sessions/{sid}/ranking").json()["results"]
    sid = client.post("/sessions", json={}).json()["session_id"]
    for t in turns_b:
        client.post(f"/sessions/{sid}/turns", json={"embedding": t})
    serial_b = client.get(f"/sessions/{sid}/ranking").json()["results"]

    # interleaved
    sa = client.post("/sessions", json={}).json()["session_id"]
    sb = client.post("/sessions", json={}).json()["session_id"]
    client.post(f"/sessions/{sa}/turns", json={"embedding": turns_a[0]})
    client.post(f"/sessions/{sb}/turns", json={"embedding": turns_b[0]})
    client.post(f"/sessions/{sb}/turns", json={"embedding": turns_b[1]})
    client.post(f"/sessions/{sa}/turns", json={"embedding": turns_a[1]})
    assert client.get(f"/sessions/{sa}/ranking").json()["results"] == serial_a
    assert client.get(f"/sessions/{sb}/ranking").json()["results"] == serial_b


def test_create_app_rejects_dim_mismatch(world):
    wrong = ModelParams.initialize(ModelConfig(dim=16, max_frames=4), seed=0)
    with pytest.raises(ValueError, match="does not match"):
        create_app(wrong, world["index"])
