#!/usr/bin/env python3
"""Drive the retrieval service turn by turn and watch the ranking sharpen.

Builds an index over a trained model's corpus, starts the HTTP app in-process,
and replays a dialogue whose turns are the known query embeddings, printing
the gold video's rank after each turn.
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from dtv import ModelConfig, ModelParams, SyntheticConfig, TrainConfig, generate_synthetic, train
from dtv.service import build_index, create_app

out_dir = Path(tempfile.mkdtemp(prefix="dtv-demo-"))

corpus = SyntheticConfig(num_train=128, num_val=32, num_test=32)
manifest = generate_synthetic(corpus, seed=0, out_dir=out_dir)
train_videos, train_queries = manifest.load_split("train")
val_videos, val_queries = manifest.load_split("val")
test_videos, test_queries = manifest.load_split("test")

params = ModelParams.initialize(ModelConfig(), seed=0)
result = train(TrainConfig(learning_rate=3e-4, epochs=6, seed=0),
               params, train_videos, train_queries, val_videos, val_queries)

# the index precomputes every video's frame encodings once; queries only
# pay for pooling at request time
checkpoint = out_dir / "model.ckpt"
result.params.save(checkpoint)
served = ModelParams.load(checkpoint)
index = build_index(served, checkpoint, test_videos, out_dir / "index",
                    max_turns=corpus.turns)
client = TestClient(create_app(served, index))

# replay one dialogue: send its turn embeddings one at a time
query = test_queries[8]  # a query that needs several turns to pin its video
gold = query.query_id
print("session targets video", gold)
session = client.post("/sessions", json={}).json()["session_id"]

for t in range(query.turns.shape[0]):
    client.post(f"/sessions/{session}/turns",
                json={"embedding": query.turns[t].tolist()})
    ranking = client.get(f"/sessions/{session}/ranking",
                         params={"k": 3}).json()["results"]
    gold_rank = next(r["rank"] for r in
                     client.get(f"/sessions/{session}/ranking",
                                params={"k": len(test_videos)}).json()["results"]
                     if r["video_id"] == gold)
    top = ", ".join("%s:%.2f" % (r["video_id"], r["score"]) for r in ranking)
    print("turn %2d  gold rank %2d  top-3 [%s]" % (t + 1, gold_rank, top))

# which frames does the final query attend to in the gold video?
attention = client.get(f"/sessions/{session}/attention/{gold}").json()
print("attention over gold frames:",
      ["%.2f" % w for w in attention["weights"]])

client.delete(f"/sessions/{session}")
print("session closed")
