"""Command-line driver.

Every subcommand takes an optional spec file of ``section.key = value`` lines
(``#`` starts a comment) plus flags; flags win over file values. Example::

    input.generator = sphere-line
    gen.seed = 7
    id.t = 0.95
    id.cutoff = 10
    id.radii = 0.1:2.0:0.1
    test.runs = 20

Artifacts are written only after all computation has finished.
"""

import argparse
import os
import sys
from dataclasses import dataclass, field


from .datagen import SphereLineSpec, gen_sphere_line
from .errors import ManifoldTestError
from .hypothesis import TestConfig, dump_json, evaluate_candidate, fit_reference
from .idim import IdParams, compute_all_ids, gmst_local_dimension, stratify
from .io import export_labeled, load_cloud, save_cloud
from .multimanifold import BuildParams, build_multimanifold
from .neighborhoods import NeighborhoodSpec, NeighborIndex, arithmetic_radii, dyadic_radii

SUBCOMMANDS = ("gen", "idim", "stratify", "build", "test", "run")
STAGES = ("idim", "build", "test")


def parse_spec_text(text, source="<spec>"):
    """Parse ``key = value`` lines into a flat dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifoldTestError("bad-spec-file", f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ManifoldTestError("bad-spec-file", f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_spec_file(path):
    if not os.path.exists(path):
        raise ManifoldTestError("missing-input", f"no such spec file: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_spec_text(fh.read(), path)


def _bool(v):
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _range(text, cast=float):
    parts = [p for p in str(text).split(":")]
    if len(parts) not in (2, 3):
        raise ManifoldTestError("bad-spec-file", f"bad range {text!r}")
    return [cast(p) for p in parts]


def _counts(text):
    text = str(text)
    if ":" in text:
        lo, hi, step = _range(text, int)
        return list(range(lo, hi + 1, step))
    return [int(v) for v in text.split(",") if v.strip()]


@dataclass
class RunSpec:
    """Typed view of a merged spec file + flag dict."""

    values: dict = field(default_factory=dict)
    sections: set = field(default_factory=set)

    def get(self, key, default=None, cast=str):
        if key not in self.values:
            return default
        return cast(self.values[key])

    # input / candidate ---------------------------------------------------

    def _cloud(self, prefix, default_seed):
        path = self.get(f"{prefix}.path")
        if path is not None:
            return load_cloud(path, self.get(f"{prefix}.format"))
        generator = self.get(f"{prefix}.generator")
        if generator is None:
            return None
        if generator != "sphere-line":
            raise ManifoldTestError("bad-spec-file", f"unknown generator {generator!r}")
        return gen_sphere_line(self.sphere_line(self.get(f"{prefix}.seed", default_seed, int)))

    def sphere_line(self, seed=None):
        return SphereLineSpec(
            n_sphere=self.get("gen.n_sphere", 2513, int),
            n_line=self.get("gen.n_line", 193, int),
            radius=self.get("gen.radius", 0.5, float),
            seed=self.get("gen.seed", 0, int) if seed is None else seed,
            area_uniform=self.get("gen.area_uniform", False, _bool),
        )

    def data(self):
        X = self._cloud("input", self.get("gen.seed", 0, int))
        if X is None:
            raise ManifoldTestError("missing-input", "no input.path or input.generator given")
        return X

    def candidate(self):
        return self._cloud("candidate", self.get("gen.seed", 0, int) + 1)

    # parameters ------------------------------------------------------------

    def id_params(self, X):
        t = self.get("id.t", 0.95, float)
        c = self.get("id.cutoff", 10, int)
        given = [k for k in ("id.radii", "id.scales", "id.knn") if k in self.values]
        if len(given) > 1:
            raise ManifoldTestError("bad-spec-file", f"conflicting neighborhood keys {given}")
        if "id.radii" in self.values:
            lo, hi, step = _range(self.values["id.radii"])
            spec = NeighborhoodSpec.ball(arithmetic_radii(hi, lo, step))
        elif "id.knn" in self.values:
            spec = NeighborhoodSpec.knn(_counts(self.values["id.knn"]))
        else:
            lo, hi = _range(self.get("id.scales", "4:7"), int)
            spec = NeighborhoodSpec.ball(dyadic_radii(X, lo, hi))
        return IdParams(t, c, spec)

    def build_params(self):
        mlp = self.get("build.min_leaf_points")
        return BuildParams(
            t=self.get("id.t", 0.95, float),
            min_leaf_points=None if mlp in (None, "", "auto") else int(mlp),
            max_depth=self.get("build.max_depth", 12, int),
        )

    def test_config(self):
        return TestConfig(
            runs=self.get("test.runs", 20, int),
            test_fraction=self.get("test.test_fraction", 1.0 / 3.0, float),
            delta=self.get("test.delta", 0.05, float),
            seed=self.get("test.seed", 0, int),
            build=self.build_params(),
            t=self.get("id.t", 0.95, float),
            one_sided=self.get("test.one_sided", False, _bool),
            support_floor=self.get("test.support_floor", 0.5, float),
            candidate_sample=self.get("test.candidate_sample", None, int),
        )

    def out_path(self, key, default):
        out_dir = self.get("out.dir", ".")
        name = self.get(f"out.{key}", default)
        return name if os.path.isabs(name) else os.path.join(out_dir, name)

    def n_jobs(self):
        return self.get("run.threads", None, int)


FLAG_KEYS = {
    "input": "input.path",
    "format": "input.format",
    "candidate": "candidate.path",
    "candidate_format": "candidate.format",
    "t": "id.t",
    "cutoff": "id.cutoff",
    "radii": "id.radii",
    "scales": "id.scales",
    "knn": "id.knn",
    "runs": "test.runs",
    "test_fraction": "test.test_fraction",
    "delta": "test.delta",
    "out_dir": "out.dir",
    "max_depth": "build.max_depth",
    "min_leaf_points": "build.min_leaf_points",
    "output": "out.points",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mmh", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("spec", nargs="?", help="spec file of section.key = value lines")
        p.add_argument("--input")
        p.add_argument("--format", choices=("csv", "xyz"))
        p.add_argument("--candidate")
        p.add_argument("--candidate-format", choices=("csv", "xyz"))
        p.add_argument("--t", type=float)
        p.add_argument("--cutoff", type=int)
        p.add_argument("--radii", help="lo:hi:step, descending ladder hi..lo")
        p.add_argument("--scales", help="lo:hi dyadic scales")
        p.add_argument("--knn", help="k1,k2,... or lo:hi:step")
        p.add_argument("--runs", type=int)
        p.add_argument("--test-fraction", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--one-sided", action="store_true", default=None)
        p.add_argument("--max-depth", type=int)
        p.add_argument("--min-leaf-points", type=int)
        p.add_argument("--output", help="gen: output file (csv or xyz by suffix)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any spec key")
    return parser


def merge_spec(args):
    values = read_spec_file(args.spec) if args.spec else {}
    sections = {k.split(".", 1)[0] for k in values}
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = str(v)
    if args.seed is not None:
        values["test.seed"] = str(args.seed)
        values["gen.seed"] = str(args.seed)
    if args.one_sided:
        values["test.one_sided"] = "true"
    for item in args.set:
        key, value = parse_spec_text(item).popitem()
        values[key] = value
    if args.radii or args.scales or args.knn:
        # a flag replaces whatever neighborhood the file chose
        chosen = {"radii": args.radii, "scales": args.scales, "knn": args.knn}
        for name, v in chosen.items():
            if v is None:
                values.pop(f"id.{name}", None)
    if "input.path" in values:
        values.pop("input.generator", None)
    if "candidate.path" in values:
        values.pop("candidate.generator", None)
    return RunSpec(values, sections)


# --- tables ----------------------------------------------------------------


def _table(header, rows):
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def manifold_table(manifolds, stats):
    rows = [
        [i, mm.point_count, mm.supported_count, len(mm), f"{stats[i]:.4f}"]
        for i, mm in sorted(manifolds.items())
    ]
    return _table(["dim", "total pts", "manifold pts", "components", "E(SQD)"], rows)


def distribution_table(dists):
    rows = [
        [
            i,
            f"{d.mean:.4f}",
            f"{d.support_fraction:.3g}",
            f"{d.train_count:.0f}",
            f"{d.test_count:.0f}",
            d.runs,
            f"{d.sd:.4f}",
            f"{d.z_cutoff:.4f}",
        ]
        for i, d in sorted(dists.items())
    ]
    return _table(["d", "E(E(SQD))", "support", "train count", "test count", "runs", "SD(E(SQD))", "z cutoff"], rows)


def decision_table(decisions):
    rows = [
        [d.stratum_dim, f"{d.statistic:.5g}", f"[{d.interval[0]:.5g}, {d.interval[1]:.5g}]",
         d.supported, d.verdict, ",".join(d.warnings) or "-"]
        for d in decisions
    ]
    return _table(["d", "statistic", "interval", "supported", "verdict", "warnings"], rows)


# --- pipeline --------------------------------------------------------------


def _stages_for(command, spec):
    if command in ("idim", "stratify"):
        return ("idim",)
    if command == "build":
        return ("idim", "build")
    if command == "test":
        return STAGES
    explicit = spec.get("run.stages")
    if explicit:
        return tuple(s.strip() for s in explicit.split(",") if s.strip())
    if not spec.sections:
        return STAGES
    stages = ["idim"]
    if spec.sections & {"build", "test", "candidate"}:
        stages.append("build")
    if spec.sections & {"test", "candidate"}:
        stages.append("test")
    return tuple(stages)


def run_pipeline(command, spec, out=None):
    """Execute ``command`` for ``spec``; returns the list of written paths."""
    out = sys.stdout if out is None else out
    artifacts = {}  # path -> writer callable; written only at the end
    n_jobs = spec.n_jobs()

    if command == "gen":
        X = gen_sphere_line(spec.sphere_line())
        path = spec.get("out.points") or spec.out_path("points", "points.csv")
        artifacts[path] = lambda p: save_cloud(X, p)
        print(f"generated {len(X)} points", file=out)
        return _write_all(artifacts)

    stages = _stages_for(command, spec)
    X = spec.data()
    id_params = spec.id_params(X)
    records = compute_all_ids(X, id_params, n_jobs=n_jobs)
    strata = stratify(records)
    print(_table(["dim", "points"], [[i, n] for i, n in strata.sizes().items()]
                 + [["undefined", len(strata.unclassified)]]), file=out)
    labeled = spec.out_path("labeled", "labeled.csv")
    artifacts[labeled] = lambda p: export_labeled(X, records, strata, p)
    if command == "stratify":
        doc = {
            "format": "mmh.strata",
            "version": 1,
            "id_params": id_params.to_dict(),
            "sizes": {str(k): v for k, v in strata.sizes().items()},
            "groups": {str(k): v.tolist() for k, v in strata.groups.items()},
            "unclassified": strata.unclassified.tolist(),
        }
        artifacts[spec.out_path("strata", "strata.json")] = lambda p: dump_json(doc, p)

    if spec.get("gmst.enabled", False, _bool):
        gm = _gmst(spec, X)
        artifacts[spec.out_path("gmst", "gmst.csv")] = lambda p: _write_text(p, gm)

    config = spec.test_config()
    build = BuildParams(config.build.t, config.build.min_leaf_points, config.build.max_depth,
                        strata.max_dimension)
    if "build" in stages and "test" not in stages:
        manifolds = {i: build_multimanifold(X[g], i, build, ids=g) for i, g in strata.groups.items()}
        _report_manifolds(manifolds, X, strata, config, out)
        artifacts[spec.out_path("manifold", "manifolds.json")] = _manifold_writer(manifolds, id_params)

    if "test" in stages:
        ref = fit_reference(X, id_params, config, records=records, n_jobs=n_jobs)
        _report_manifolds(ref.manifolds, X, strata, config, out)
        artifacts[spec.out_path("manifold", "manifolds.json")] = _manifold_writer(ref.manifolds, id_params)
        print(distribution_table(ref.distributions), file=out)
        for i, why in sorted(ref.skipped.items()):
            print(f"stratum {i} skipped: {why}", file=out)
        dist_doc = {
            "format": "mmh.distributions",
            "version": 1,
            "config": config.to_dict(),
            "id_params": id_params.to_dict(),
            "distributions": [d.to_dict() for _, d in sorted(ref.distributions.items())],
            "skipped": {str(k): v for k, v in sorted(ref.skipped.items())},
        }
        artifacts[spec.out_path("distribution", "distributions.json")] = lambda p: dump_json(dist_doc, p)
        Y = spec.candidate()
        if Y is not None:
            if Y.shape[1] != X.shape[1]:
                raise ManifoldTestError("dimension-mismatch", f"data {X.shape[1]}-d, candidate {Y.shape[1]}-d")
            decisions = evaluate_candidate(ref, Y, id_params, config, n_jobs=n_jobs)
            print(decision_table(decisions), file=out)
            dec_doc = {
                "format": "mmh.decisions",
                "version": 1,
                "decisions": [d.to_dict() for d in decisions],
            }
            artifacts[spec.out_path("decision", "decisions.json")] = lambda p: dump_json(dec_doc, p)

    return _write_all(artifacts)


def _report_manifolds(manifolds, X, strata, config, out):
    from .hypothesis import sqd_total

    stats = {i: sqd_total(X[strata.groups[i]], mm, config.t).mean_bound for i, mm in manifolds.items()}
    print(manifold_table(manifolds, stats), file=out)


def _manifold_writer(manifolds, id_params):
    doc = {
        "format": "mmh.manifolds",
        "version": 1,
        "id_params": id_params.to_dict(),
        "manifolds": [mm.to_dict() for _, mm in sorted(manifolds.items())],
    }
    return lambda p: dump_json(doc, p)


def _gmst(spec, X):
    lo, hi, step = _range(spec.get("gmst.n_range", "200:400:25"), int)
    n_range = list(range(lo, hi + 1, step))
    k = spec.get("gmst.k", 5, int)
    gamma = spec.get("gmst.gamma", 1.0, float)
    every = spec.get("gmst.stride", 1, int)
    index = NeighborIndex(X)
    lines = ["point_id,d_est,d_rounded,exponent,clamped"]
    for p in range(0, len(X), every):
        f = gmst_local_dimension(X, p, n_range, k, gamma, index=index,
                                 averaging=spec.get("gmst.averaging", "joint"))
        lines.append(f"{p},{f.d_est!r},{f.d_rounded},{f.exponent!r},{int(f.clamped)}")
    return "\n".join(lines) + "\n"


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_all(artifacts):
    written = []
    for path, writer in artifacts.items():
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        writer(path)
        written.append(path)
    return written


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = merge_spec(args)
        written = run_pipeline(args.command, spec)
    except ManifoldTestError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
