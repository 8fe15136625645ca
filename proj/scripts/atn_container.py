"""Reader and writer for the attnparse tensor container.

Layout: b"ATNPARS1", little-endian u64 header length, JSON header, payload.
Header entries are {"dtype": "F32", "shape": [...], "offset": N}; the optional
"__metadata__" key holds free-form JSON. A corpus container is accompanied by
the sidecar "<container>.json" listing {words, pieces, alignment} per sentence.
"""

import json
import struct
import sys

import numpy as np

MAGIC = b"ATNPARS1"
METADATA_KEY = "__metadata__"


def write_container(path, tensors, metadata=None):
    header = {}
    payload = bytearray()
    for name, array in tensors.items():
        data = np.ascontiguousarray(array, dtype="<f4")
        header[name] = {"dtype": "F32", "shape": list(data.shape), "offset": len(payload)}
        payload += data.tobytes()
    if metadata:
        header[METADATA_KEY] = metadata
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        f.write(payload)


def read_container(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ValueError("bad magic")
    (length,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + length])
    payload = blob[16 + length :]
    metadata = header.pop(METADATA_KEY, {})
    tensors = {}
    for name, spec in header.items():
        if spec["dtype"] != "F32":
            raise ValueError(f"{name}: unsupported dtype {spec['dtype']}")
        count = int(np.prod(spec["shape"]))
        start = spec["offset"]
        tensors[name] = np.frombuffer(payload, "<f4", count, start).reshape(spec["shape"])
    return tensors, metadata


def write_sidecar(path, sentences):
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        json.dump(sentences, f)


def _fixture(path):
    """Two-sentence corpus shaped like extractor output: delimiters, split
    words, a leading singleton head dimension and one layer of projections."""
    rng = np.random.default_rng(7)
    sentences = [
        {"words": ["the", "cat", "sat"], "pieces": ["[CLS]", "the", "ca", "##t", "sat", "[SEP]"],
         "alignment": [-1, 0, 1, 1, 2, -1]},
        {"words": ["dogs", "bark"], "pieces": ["[CLS]", "dogs", "bark", "[SEP]"],
         "alignment": [-1, 0, 1, -1]},
    ]
    d_model = 4
    tensors = {}
    for i, s in enumerate(sentences):
        m = len(s["pieces"])
        for h in range(2):
            logits = rng.normal(size=(m, m))
            a = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
            tensors[f"s{i}/attn/l1/h{h}"] = a.reshape(1, m, m)
        tensors[f"s{i}/hidden/l0"] = rng.normal(size=(m, d_model))
    tensors["proj/l1/wq"] = rng.normal(size=(d_model, d_model))
    tensors["proj/l1/wk"] = rng.normal(size=(d_model, d_model))
    write_container(path, tensors, {"model": "fixture", "layers": [1]})
    write_sidecar(path, sentences)


if __name__ == "__main__":
    _fixture(sys.argv[1])
