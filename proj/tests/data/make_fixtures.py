#!/usr/bin/env python3
"""Regenerates the bundled test fixtures.

Everything here is computed independently of the C++ code: stores are written
straight from the documented file layout and the golden neighbor lists come from
a plain full-scan, full-sort search.

    python3 tests/data/make_fixtures.py
"""

import json
import os
import random
import struct

HERE = os.path.dirname(os.path.abspath(__file__))


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def write_jsonl(path, rows):
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


def write_store(path, rows, dim, variant):
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "manifest.json"), "w") as f:
        f.write(json.dumps({"dimension": dim, "count": len(rows), "dtype": "float32le", "variant": variant}, indent=2))
        f.write("\n")
    with open(os.path.join(path, "vectors.bin"), "wb") as f:
        for r in rows:
            f.write(struct.pack("<%df" % dim, *r["vector"]))
    write_jsonl(os.path.join(path, "records.jsonl"),
                [{"image_id": r["image_id"], "label": r["label"], "location": r["location"]} for r in rows])


def sq_l2(a, b):
    acc = 0.0
    for x, y in zip(a, b):
        d = x - y
        acc += d * d
    return acc


def brute_force(db, q, k):
    scored = sorted(((sq_l2(r["vector"], q), i) for i, r in enumerate(db)), key=lambda t: (t[0], t[1]))
    return scored[:k]


def search_fixture(rng):
    out = os.path.join(HERE, "search")
    os.makedirs(out, exist_ok=True)
    dim = 8
    db = []
    for i in range(40):
        db.append({"image_id": "db%03d" % i, "label": i % 4, "location": "L%d" % (i % 5),
                   "vector": [f32(rng.gauss(0, 1)) for _ in range(dim)]})
    # A duplicate row gives an exact score tie, broken by row index.
    db.append({"image_id": "db_dup", "label": 1, "location": "L0", "vector": list(db[3]["vector"])})
    queries = []
    for i in range(12):
        queries.append({"image_id": "q%02d" % i, "label": None, "location": "L9",
                        "vector": [f32(rng.gauss(0, 1)) for _ in range(dim)]})
    queries.append({"image_id": "q_exact", "label": None, "location": "L9", "vector": list(db[3]["vector"])})
    write_store(os.path.join(out, "db_store"), db, dim, "cropped")
    write_store(os.path.join(out, "queries_store"), queries, dim, "cropped")
    golden = []
    for q in queries:
        nbrs = brute_force(db, q["vector"], 3)
        golden.append({"query_id": q["image_id"],
                       "neighbors": [{"id": db[i]["image_id"], "label": db[i]["label"], "score": s} for s, i in nbrs]})
    write_jsonl(os.path.join(out, "golden_l2_k3.jsonl"), golden)


CLUSTER_NAMES = ["bobcat", "coyote", "deer", "rabbit", "raccoon"]


def cluster_fixture(rng):
    """Five Gaussian clusters, sigma 1, centers 10 sigma apart along orthogonal axes."""
    out = os.path.join(HERE, "clusters")
    os.makedirs(out, exist_ok=True)
    dim = 16
    sigma = 1.0
    sep = 10.0 * sigma
    # Orthogonal axes scaled so every pair of centers is exactly `sep` apart.
    centers = []
    for c in range(len(CLUSTER_NAMES)):
        v = [0.0] * dim
        v[c] = sep / 2 ** 0.5
        centers.append(v)

    def sample(c):
        return [f32(centers[c][d] + rng.gauss(0, sigma)) for d in range(dim)]

    locations = ["%d" % i for i in range(1, 9)]
    db_locs = set(locations[:5])
    db_crop, db_full, q_crop, q_full = [], [], [], []
    images, annotations = [], []
    md_images = []
    ann_id = 0
    img_no = 0
    for c, name in enumerate(CLUSTER_NAMES):
        for i in range(30):
            loc = locations[i % 5]
            iid = "db_%s_%02d" % (name, i)
            db_crop.append({"image_id": iid, "label": name, "location": loc, "vector": sample(c)})
            db_full.append({"image_id": iid, "label": name, "location": loc, "vector": sample(c)})
        for i in range(12):
            loc = locations[i % len(locations)]
            iid = "img%04d" % img_no
            img_no += 1
            has_det = i % 4 != 3
            if has_det:
                q_crop.append({"image_id": iid, "location": loc, "vector": sample(c)})
            q_full.append({"image_id": iid, "location": loc, "vector": sample(c)})
            images.append({"id": iid, "file_name": "cam/%s.jpg" % iid, "width": 1280, "height": 720,
                           "location": int(loc), "date_captured": "2013-06-%02d %02d:15:00" % (1 + i, 3 + i),
                           "split": "cis" if loc in db_locs else "trans"})
            annotations.append({"id": "a%d" % ann_id, "image_id": iid, "category_id": c + 1})
            ann_id += 1
            dets = []
            if has_det:
                dets.append({"category": "1", "conf": 0.91, "bbox": [0.25, 0.3, 0.2, 0.25]})
                dets.append({"category": "2", "conf": 0.12, "bbox": [0.7, 0.1, 0.1, 0.3]})
            md_images.append({"file": "cam/%s.jpg" % iid, "detections": dets})
    write_jsonl(os.path.join(out, "db_cropped.jsonl"), db_crop)
    write_jsonl(os.path.join(out, "db_full.jsonl"), db_full)
    write_jsonl(os.path.join(out, "queries_cropped.jsonl"), q_crop)
    write_jsonl(os.path.join(out, "queries_full.jsonl"), q_full)
    categories = [{"id": c + 1, "name": n} for c, n in enumerate(CLUSTER_NAMES)]
    with open(os.path.join(out, "truth.json"), "w") as f:
        json.dump({"images": images, "annotations": annotations, "categories": categories}, f, indent=1)
    with open(os.path.join(out, "md.json"), "w") as f:
        json.dump({"images": md_images,
                   "detection_categories": {"1": "animal", "2": "person", "3": "vehicle"},
                   "info": {"detector": "md_v5a.0.0.pt", "format_version": "1.3"}}, f, indent=1)
    # Database images also get ground truth so ingest can resolve names.
    db_truth = {"images": [{"id": r["image_id"], "file_name": r["image_id"] + ".jpg", "width": 1280, "height": 720,
                            "location": int(r["location"])} for r in db_crop],
                "annotations": [{"id": i, "image_id": r["image_id"], "category_id": CLUSTER_NAMES.index(r["label"]) + 1}
                                for i, r in enumerate(db_crop)],
                "categories": categories}
    with open(os.path.join(out, "db_truth.json"), "w") as f:
        json.dump(db_truth, f, indent=1)


def main():
    rng = random.Random(20240501)
    search_fixture(rng)
    cluster_fixture(rng)


if __name__ == "__main__":
    main()
