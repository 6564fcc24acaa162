"""Corpus generation: randomized clean/noisy image pairs on disk.

Each image pair is produced from a generator derived from (master seed,
image id) alone, so pairs can be regenerated independently and a corpus
could be built image-parallel without changing a single byte of output.
Both members are standardized to [0, 255] and stored as float images under
``clean/`` and ``noisy/`` with matching zero-padded ids.

A configurable number of pairs have their noisy member replaced by (or, in
append mode, duplicated as) the clean image plus white Gaussian noise,
which diversifies the noise statistics seen in training.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import SimulateConfig
from .image_io import write_image
from .phase import random_phase_spec, spec_to_dict
from .seeding import derive_rng
from .speckle import SimulationParams, add_awgn, normalize_to_range, render_clean, render_noisy

NS_IMAGE = 1
NS_CORPUS = 2
NS_AWGN = 5


def generate_pair(
    cfg: SimulateConfig, master_seed: int, image_id: int
) -> tuple[np.ndarray, np.ndarray, dict]:
    """One clean/noisy pair plus its provenance record.

    Draw order within the per-image stream: phase spec, object-beam
    intensity, noise expectation, then the pixel-level noise fields.
    """
    rng = derive_rng(master_seed, NS_IMAGE, image_id)
    spec = random_phase_spec(rng, cfg.height, cfg.width, cfg.min_terms, cfg.max_terms)
    a0c_sq = float(rng.uniform(*cfg.a0c_sq_range))
    ned_lambda = float(rng.uniform(*cfg.ned_lambda_range))
    params = SimulationParams(
        a0c_sq=a0c_sq,
        ned_lambda=ned_lambda,
        width=cfg.width,
        height=cfg.height,
        seed=master_seed,
        ar_sq=cfg.ar_sq,
        phi_r=cfg.phi_r,
        index_origin=cfg.index_origin,
    )
    clean = normalize_to_range(render_clean(params, spec))
    noisy = normalize_to_range(render_noisy(params, spec, rng))
    record = {
        "id": image_id,
        "a0c_sq": a0c_sq,
        "ned_lambda": ned_lambda,
        "phase": spec_to_dict(spec),
        "awgn": False,
    }
    return clean, noisy, record


def generate_corpus(cfg: SimulateConfig, master_seed: int, out_dir) -> dict:
    """Write the corpus tree and return its manifest."""
    out = Path(out_dir)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    (out / "noisy").mkdir(parents=True, exist_ok=True)
    records = []
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    for image_id in range(cfg.count):
        clean, noisy, record = generate_pair(cfg, master_seed, image_id)
        pairs.append((clean, noisy))
        records.append(record)

    if cfg.awgn_count:
        chooser = derive_rng(master_seed, NS_CORPUS, 0)
        selected = chooser.permutation(cfg.count)[: cfg.awgn_count]
        for image_id in sorted(int(i) for i in selected):
            # Own derived stream per id: the substitution stays a pure
            # function of (seed, id) like everything else about the pair.
            awgn_rng = derive_rng(master_seed, NS_AWGN, image_id)
            clean = pairs[image_id][0]
            corrupted = add_awgn(clean, cfg.awgn_sigma, awgn_rng)
            if cfg.awgn_mode == "in_place":
                pairs[image_id] = (clean, corrupted)
                records[image_id]["awgn"] = True
            else:
                new_id = len(pairs)
                pairs.append((clean, corrupted))
                records.append(
                    {
                        "id": new_id,
                        "source_id": image_id,
                        "awgn": True,
                        "awgn_sigma": cfg.awgn_sigma,
                    }
                )

    for image_id, (clean, noisy) in enumerate(pairs):
        write_image(clean, out / "clean" / f"{image_id:04d}.fpd1")
        write_image(noisy, out / "noisy" / f"{image_id:04d}.fpd1")
    manifest = {
        "seed": master_seed,
        "count": len(pairs),
        "images": records,
    }
    return manifest


def load_corpus(corpus_dir) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read matching clean/noisy pairs back, ordered by id."""
    from .image_io import read_image

    corpus_dir = Path(corpus_dir)
    clean_dir = corpus_dir / "clean"
    noisy_dir = corpus_dir / "noisy"
    if not clean_dir.is_dir() or not noisy_dir.is_dir():
        raise FileNotFoundError(
            f"{corpus_dir} is not a corpus (needs clean/ and noisy/ subdirectories)"
        )
    pairs = []
    for clean_path in sorted(clean_dir.iterdir()):
        noisy_path = noisy_dir / clean_path.name
        if not noisy_path.exists():
            raise FileNotFoundError(f"corpus id {clean_path.stem} has no noisy member")
        pairs.append(
            (
                read_image(clean_path).astype(np.float32),
                read_image(noisy_path).astype(np.float32),
            )
        )
    return pairs


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
