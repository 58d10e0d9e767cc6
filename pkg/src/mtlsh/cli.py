"""Command-line driver: fields -> trees -> signatures -> LSH -> matrices.

Every stage is a subcommand whose output file feeds the next one; ``run``
and ``demo`` chain them all.  Options may also come from a ``key=value``
file given with ``--config``; flags on the command line win.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import distance_matrix, precision_recall
from .field import (
    ScalarField, compute_merge_tree, generate_moving_gaussian, grid_positions,
    load_field, save_field,
)
from .lsh import binary_matrix, build_index, candidate_pairs, similarity_matrix
from .signatures import (
    HashFamily, read_signatures, rmh_signature, ss_signature, write_signatures,
)
from .tree import assign_labels, simplify_by_persistence, tree_from_json, tree_to_json

log = logging.getLogger("mtlsh")

__all__ = ["PipelineConfig", "PipelineError", "run_pipeline", "main"]


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    input: str | None = None
    generate: str | None = None
    direction: str = "sublevel"
    epsilon: float = 0.0
    labeling: str = "mesh-index"
    flavor: str = "SS"
    t: int = 4
    k: int = 20
    q: int = 2
    r: int = 1
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    with_di: bool = False
    classes: str | None = None

    def validate(self) -> None:
        if (self.input is None) == (self.generate is None):
            raise PipelineError("validate", "give exactly one of --input or --generate")
        if self.direction not in ("sublevel", "superlevel"):
            raise PipelineError("validate", f"bad direction {self.direction!r}")
        if self.labeling not in ("mesh-index", "euclidean"):
            raise PipelineError("validate", f"bad labeling {self.labeling!r}")
        if self.epsilon < 0:
            raise PipelineError("validate", "epsilon must be non-negative")
        if self.flavor not in ("SS", "RMH"):
            raise PipelineError("validate", f"flavor must be SS or RMH, got {self.flavor!r}")
        for name in ("t", "k", "q", "r", "workers"):
            if getattr(self, name) < 1:
                raise PipelineError("validate", f"{name} must be >= 1")
        k = self.signature_length
        if k % self.r:
            raise PipelineError("validate", f"r={self.r} does not divide k={k}")

    @property
    def signature_length(self) -> int:
        return self.k if self.flavor == "SS" else self.q * self.q


def parse_generator(spec: str) -> tuple[str, dict]:
    """``"moving-gaussian:steps=12,nx=64"`` -> ``("moving-gaussian", {...})``."""
    name, _, rest = spec.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        opts[key.strip()] = value.strip()
    return name.strip(), opts


def _generate(spec: str, seed: int) -> list[ScalarField]:
    name, opts = parse_generator(spec)
    if name != "moving-gaussian":
        raise ValueError(f"unknown generator {name!r}")
    steps = int(opts.pop("steps", 12))
    nx = int(opts.pop("nx", 64))
    ny = int(opts.pop("ny", nx))
    noise = float(opts.pop("noise", 1e-3))
    if opts:
        raise ValueError(f"unknown generator options {sorted(opts)}")
    return generate_moving_gaussian(steps, (nx, ny), seed=seed, noise=noise)


def _load_inputs(pattern: str) -> tuple[list[ScalarField], list[str]]:
    if os.path.isdir(pattern):
        paths = sorted(glob.glob(os.path.join(pattern, "*.mtlf")) + glob.glob(os.path.join(pattern, "*.csv")))
    else:
        paths = sorted(glob.glob(pattern))
    if not paths:
        raise FileNotFoundError(f"no field files match {pattern!r}")
    return [load_field(p) for p in paths], paths


def _pmap(func, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


def _build_tree(field_, direction, epsilon):
    return simplify_by_persistence(compute_merge_tree(field_, direction), epsilon)


def _sign(tree, flavor, t, family):
    if flavor == "SS":
        return ss_signature(tree, t, family)
    return rmh_signature(tree, family)


def build_trees(fields, direction="sublevel", epsilon=0.0, labeling="mesh-index", workers=1):
    trees = _pmap(partial(_build_tree, direction=direction, epsilon=epsilon), fields, workers)
    if labeling == "mesh-index":
        return [assign_labels(t, "mesh-index") for t in trees]
    reference = assign_labels(trees[0], "mesh-index")
    ref_pos = grid_positions(fields[0])
    return [
        assign_labels(t, "euclidean", reference=reference, positions=grid_positions(f),
                      reference_positions=ref_pos)
        for t, f in zip(trees, fields)
    ]


def sign_trees(trees, flavor="SS", t=4, k=20, q=2, seed=0, workers=1):
    family = HashFamily(seed, k if flavor == "SS" else q)
    return _pmap(partial(_sign, flavor=flavor, t=t, family=family), trees, workers)


class _Artifacts:
    """Atomic file writer that can roll back everything it wrote."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def write(self, name: str, writer) -> Path:
        final = self.out_dir / name
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.")
        os.close(fd)
        try:
            writer(tmp)
            os.replace(tmp, final)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        self.written.append(final)
        return final

    def text(self, name: str, content: str) -> Path:
        return self.write(name, lambda p: Path(p).write_text(content))

    def rollback(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        self.written.clear()


def _trees_jsonl(trees, sources) -> str:
    lines = []
    for i, (t, src) in enumerate(zip(trees, sources)):
        doc = {"tree_id": i, "source": src}
        doc.update(tree_to_json(t))
        lines.append(json.dumps(doc))
    return "\n".join(lines) + "\n"


def read_trees(path):
    items = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            doc = json.loads(line)
            items.append((doc.get("tree_id", len(items)), tree_from_json(doc)))
    return items


def _pairs_csv(pairs) -> str:
    rows = ["tree_a,tree_b"] + [f"{a},{b}" for a, b in sorted(pairs)]
    return "\n".join(rows) + "\n"


def read_pairs(path) -> set[tuple[int, int]]:
    pairs = set()
    for line in Path(path).read_text().splitlines()[1:]:
        if line.strip():
            a, b = (int(x) for x in line.split(","))
            pairs.add((min(a, b), max(a, b)))
    return pairs


def read_classes(path) -> list[str]:
    return [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]


def _export_matrix(art: _Artifacts, stem: str, matrix) -> None:
    art.write(f"{stem}.csv", matrix.to_csv)
    art.write(f"{stem}.pgm", matrix.to_pgm)


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and write its artifacts; returns the manifest.

    On failure every file written so far is removed and a
    :class:`PipelineError` naming the stage is raised.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = _Artifacts(out)
    timings: dict[str, float] = {}
    stage = "field"
    try:
        t0 = time.perf_counter()
        if config.generate:
            fields = _generate(config.generate, config.seed)
            sources = [f"{config.generate}#{i}" for i in range(len(fields))]
        else:
            fields, sources = _load_inputs(config.input)
        timings[stage] = time.perf_counter() - t0

        stage = "tree"
        t0 = time.perf_counter()
        trees = build_trees(fields, config.direction, config.epsilon, config.labeling,
                            config.workers)
        art.text("trees.jsonl", _trees_jsonl(trees, sources))
        timings[stage] = time.perf_counter() - t0

        stage = "sign"
        t0 = time.perf_counter()
        sigs = sign_trees(trees, config.flavor, config.t, config.k, config.q, config.seed,
                          config.workers)
        art.write("signatures.jsonl", lambda p: write_signatures(p, enumerate(sigs)))
        timings[stage] = time.perf_counter() - t0

        stage = "index"
        t0 = time.perf_counter()
        index = build_index(list(enumerate(sigs)), config.r)
        pairs = candidate_pairs(index)
        art.text("pairs.csv", _pairs_csv(pairs))
        _export_matrix(art, "collision", binary_matrix(pairs, len(sigs)))
        _export_matrix(art, "similarity", similarity_matrix(sigs))
        timings[stage] = time.perf_counter() - t0

        report = None
        if config.with_di:
            stage = "dist"
            t0 = time.perf_counter()
            _export_matrix(art, "interleaving", distance_matrix(trees))
            timings[stage] = time.perf_counter() - t0
        if config.classes:
            stage = "eval"
            t0 = time.perf_counter()
            classes = read_classes(config.classes)
            if len(classes) != len(trees):
                raise ValueError(f"{len(classes)} class labels for {len(trees)} trees")
            p, r = precision_recall(pairs, classes)
            report = {"precision": p, "recall": r, "pairs": len(pairs)}
            art.text("report.json", json.dumps(report, indent=2) + "\n")
            timings[stage] = time.perf_counter() - t0

        stage = "manifest"
        manifest = {
            "config": asdict(config),
            "signature_length": config.signature_length,
            "bands": config.signature_length // config.r,
            "trees": len(trees),
            "candidate_pairs": len(pairs),
            "report": report,
            "versions": {
                "mtlsh": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
            "timings_s": timings,
        }
        art.text("manifest.json", json.dumps(manifest, indent=2) + "\n")
        return manifest
    except PipelineError:
        art.rollback()
        raise
    except Exception as exc:
        art.rollback()
        raise PipelineError(stage, str(exc)) from exc


# -- argument parsing --------------------------------------------------------

def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict[str, str]:
    cfg = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{n}: expected key=value")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--out-dir", dest="out_dir", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _add_tree_opts(p):
    p.add_argument("--direction", choices=["sublevel", "superlevel"], default="sublevel")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--labeling", choices=["mesh-index", "euclidean"], default="mesh-index")


def _add_sign_opts(p):
    p.add_argument("--flavor", choices=["SS", "RMH"], default="SS")
    p.add_argument("--t", type=int, default=4)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--q", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtlsh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="generate or inspect scalar fields")
    _add_common(p)
    p.add_argument("action", choices=["generate", "info"])
    p.add_argument("--generate", default="moving-gaussian:steps=12")
    p.add_argument("--input")
    p.add_argument("--format", choices=["raw-binary", "csv"], default="raw-binary")

    p = sub.add_parser("tree", help="build, simplify and label merge trees")
    _add_common(p)
    _add_tree_opts(p)
    p.add_argument("--input", required=True, help="field directory or glob of field files")

    p = sub.add_parser("sign", help="compute SS or RMH signatures")
    _add_common(p)
    _add_sign_opts(p)
    p.add_argument("--trees", required=True)

    p = sub.add_parser("index", help="band signatures; write pairs and matrices")
    _add_common(p)
    p.add_argument("--signatures", required=True)
    p.add_argument("--r", type=int, default=1)

    p = sub.add_parser("dist", help="interleaving-distance matrix")
    _add_common(p)
    p.add_argument("--trees", required=True)

    p = sub.add_parser("eval", help="precision and recall of candidate pairs")
    _add_common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--classes", required=True, help="one class label per line, tree order")

    for name, helptext in (("run", "full pipeline"), ("demo", "Moving Gaussian end to end")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_tree_opts(p)
        _add_sign_opts(p)
        p.add_argument("--input")
        p.add_argument("--generate")
        p.add_argument("--r", type=int, default=1)
        p.add_argument("--with-di", dest="with_di", type=_bool, nargs="?", const=True,
                       default=False)
        p.add_argument("--classes")
    sub.choices["demo"].set_defaults(
        generate="moving-gaussian:steps=12", direction="superlevel", epsilon=0.02,
        labeling="euclidean", flavor="RMH", q=2, k=8, r=4, with_di=True,
    )
    return parser


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _config_from(args) -> PipelineConfig:
    names = PipelineConfig.__dataclass_fields__
    return PipelineConfig(**{k: v for k, v in vars(args).items() if k in names})


def _stage_tree(args, art):
    fields, paths = _load_inputs(args.input)
    trees = build_trees(fields, args.direction, args.epsilon, args.labeling, args.workers)
    art.text("trees.jsonl", _trees_jsonl(trees, paths))
    print(f"wrote {len(trees)} trees")


def _stage_sign(args, art):
    trees = read_trees(args.trees)
    sigs = sign_trees([t for _, t in trees], args.flavor, args.t, args.k, args.q, args.seed,
                      args.workers)
    ids = [tid for tid, _ in trees]
    art.write("signatures.jsonl", lambda p: write_signatures(p, zip(ids, sigs)))
    print(f"wrote {len(sigs)} {args.flavor} signatures of length {len(sigs[0])}")


def _stage_index(args, art):
    items = read_signatures(args.signatures)
    ids = [tid for tid, _ in items]
    if ids != list(range(len(ids))):
        raise ValueError("tree ids must be 0..n-1 in file order")
    index = build_index(items, args.r)
    pairs = candidate_pairs(index)
    art.text("pairs.csv", _pairs_csv(pairs))
    _export_matrix(art, "collision", binary_matrix(pairs, len(items)))
    _export_matrix(art, "similarity", similarity_matrix([s for _, s in items]))
    print(f"{len(pairs)} candidate pairs over {index.b} bands of {index.r} rows")


def _stage_dist(args, art):
    trees = [t for _, t in read_trees(args.trees)]
    _export_matrix(art, "interleaving", distance_matrix(trees))
    print(f"wrote {len(trees)}x{len(trees)} interleaving-distance matrix")


def _stage_eval(args, art):
    pairs = read_pairs(args.pairs)
    classes = read_classes(args.classes)
    p, r = precision_recall(pairs, classes)
    report = {"precision": p, "recall": r, "pairs": len(pairs)}
    art.text("report.json", json.dumps(report, indent=2) + "\n")
    print(f"precision {p:.4f}  recall {r:.4f}")


def _stage_field(args, art):
    if args.action == "info":
        if not args.input:
            raise ValueError("field info needs --input")
        f = load_field(args.input)
        print(json.dumps({"dims": f.dims, "spacing": f.spacing,
                          "min": float(f.values.min()), "max": float(f.values.max())}))
        return
    fields = _generate(args.generate, args.seed)
    ext = "mtlf" if args.format == "raw-binary" else "csv"
    for i, f in enumerate(fields):
        art.write(f"field_{i:03d}.{ext}", partial(_save, f, format=args.format))
    print(f"wrote {len(fields)} fields")


def _save(f, path, format):
    save_field(f, path, format)


_STAGES = {
    "field": _stage_field, "tree": _stage_tree, "sign": _stage_sign,
    "index": _stage_index, "dist": _stage_dist, "eval": _stage_eval,
}


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except (OSError, ValueError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command in ("run", "demo"):
        try:
            manifest = run_pipeline(_config_from(args))
        except PipelineError as exc:
            print(f"error {exc}", file=sys.stderr)
            return 1
        print(f"{manifest['trees']} trees, {manifest['candidate_pairs']} candidate pairs "
              f"-> {args.out_dir}")
        return 0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = _Artifacts(out)
    try:
        _STAGES[args.command](args, art)
    except Exception as exc:
        art.rollback()
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
