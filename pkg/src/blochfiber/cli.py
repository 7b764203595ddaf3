"""Command-line front end: model runs driven by a JSON config file.

Subcommands take a single positional config path plus ``--out`` and
``--seed`` overrides.  Exit codes: 0 success, 1 check or gap failure,
2 malformed configuration.  All outputs are deterministic: rerunning the
same config produces byte-identical files.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import fibering, topology
from .errors import BlochFiberError, ConfigError, GapTooSmallError
from .fibering import TorusGrid, compose_covariant, fiber_operator
from .finitegroup import bf_projector, decompose_finite
from .lattice import EXACT_TOL, commutes_within, unitary_defect, verify_wandering
from .models import (
    ModelInstance,
    finite_group_model,
    hofstadter_model,
    mathieu_model,
    periodic_chain_model,
)

MODELS = ("mathieu", "hofstadter", "chain", "finite_group")


@dataclass
class RunConfig:
    """Validated run parameters; every field has a documented default.

    ``model``      one of mathieu | hofstadter | chain | finite_group
    ``p, q``       flux numerator/denominator (flux models); q is also the
                   period of the chain potential
    ``potential``  onsite values for the chain (default: q zeros)
    ``orders``     cyclic-group orders for finite_group
    ``M``          truncation radius (default 12 for 1-D models, 6 for 2-D)
    ``L``          torus grid points per dimension
    ``band_set``   bands for the chern command (default: each band alone)
    ``q_max``      largest denominator for the butterfly command
    ``window``     wandering verification window (default: model choice)
    ``candidates`` wandering candidate cell indices (verify-only override)
    ``seed``       RNG seed for randomized verification probes
    ``probes``     number of random probe vectors per randomized check
    ``gap_floor``  minimal admissible band separation
    ``exact_tol``  tolerance for identities exact in the model
    ``corrupt_generator``  testing hook: damage a finite-group generator
    """

    model: str = ""
    p: int = 1
    q: int = 3
    potential: list[float] | None = None
    orders: list[int] | None = None
    M: int | None = None
    L: int = 64
    band_set: list[int] | None = None
    q_max: int = 6
    window: int | None = None
    candidates: list[int] | None = None
    output_dir: str = "out"
    seed: int = 0
    probes: int = 100
    gap_floor: float = 1e-6
    exact_tol: float = EXACT_TOL
    corrupt_generator: bool = False

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if not isinstance(self.q, int) or self.q < 1:
            raise ConfigError(f"q must be a positive integer, got {self.q!r}")
        if not isinstance(self.p, int):
            raise ConfigError(f"p must be an integer, got {self.p!r}")
        if not isinstance(self.L, int) or self.L < 1:
            raise ConfigError(f"L must be a positive integer, got {self.L!r}")
        if self.M is not None and (not isinstance(self.M, int) or self.M < 3):
            raise ConfigError(f"M must be an integer >= 3, got {self.M!r}")
        if self.model in ("mathieu", "hofstadter") and math.gcd(self.p, self.q) != 1:
            raise ConfigError(f"flux {self.p}/{self.q} is not a reduced fraction")
        if self.model == "finite_group":
            if not self.orders or any(not isinstance(o, int) or o < 2 for o in self.orders):
                raise ConfigError(f"finite_group needs orders, all >= 2, got {self.orders!r}")
        if self.model == "chain" and self.potential is not None \
                and len(self.potential) != self.q:
            raise ConfigError(
                f"potential has {len(self.potential)} entries, expected q={self.q}")
        if self.band_set is not None and (
                not self.band_set or any(not isinstance(b, int) for b in self.band_set)):
            raise ConfigError(f"band_set must be a non-empty list of ints, got {self.band_set!r}")
        if self.probes < 1 or self.gap_floor <= 0 or self.exact_tol <= 0:
            raise ConfigError("probes, gap_floor, exact_tol must be positive")

    def build_model(self) -> ModelInstance:
        if self.model == "mathieu":
            return mathieu_model(self.p, self.q, M=self.M or 12, window=self.window)
        if self.model == "hofstadter":
            return hofstadter_model(self.p, self.q, M=self.M or 6, window=self.window)
        if self.model == "chain":
            potential = self.potential if self.potential is not None else [0.0] * self.q
            return periodic_chain_model(self.q, potential, M=self.M or 12,
                                        window=self.window)
        raise ConfigError(f"model {self.model!r} does not live on a torus")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _random_coeffs(rng: np.random.Generator, q: int, N: int, radius: int,
                   terms: int = 6) -> dict:
    coeffs = {}
    for _ in range(terms):
        k = int(rng.integers(q))
        b = tuple(int(x) for x in rng.integers(-radius, radius + 1, size=N))
        coeffs[(k, b)] = complex(rng.normal(), rng.normal())
    return coeffs


def _random_covariant(rng: np.random.Generator, q: int, N: int, radius: int = 2,
                      terms: int = 8) -> fibering.CovariantOperator:
    table = {}
    for _ in range(terms):
        h = int(rng.integers(q))
        k = int(rng.integers(q))
        b = tuple(int(x) for x in rng.integers(-radius, radius + 1, size=N))
        table[(h, k, b)] = complex(rng.normal(), rng.normal())
    return fibering.CovariantOperator.from_table(q, N, table)


def _torus_model_checks(cfg: RunConfig) -> list[dict]:
    tol = cfg.exact_tol
    model = cfg.build_model()
    dec = model.decomposition
    checks = []

    if cfg.candidates is not None:
        report = verify_wandering(dec.generators,
                                  [(k, (0,) * model.N) for k in cfg.candidates],
                                  window=dec.report.window, tol=tol)
    else:
        report = dec.report
    checks.append({"name": "wandering_max_violation",
                   "measured": report.max_violation, "tolerance": tol})
    checks.append({"name": "wandering_cyclic_defect",
                   "measured": report.cyclic_defect, "tolerance": tol})

    udef = max(unitary_defect(U, tol) for U in dec.generators)
    checks.append({"name": "generator_unitary_defect",
                   "measured": udef, "tolerance": tol})

    comm = 0.0
    for A, B in itertools.combinations(dec.generators, 2):
        _, value = commutes_within(A, B, tol)
        comm = max(comm, value)
    checks.append({"name": "generator_commutation",
                   "measured": comm, "tolerance": tol})

    ham = model.hamiltonian()
    checks.append({"name": "hamiltonian_hermitian_defect",
                   "measured": ham.hermitian_defect(), "tolerance": tol})

    rng = np.random.default_rng(cfg.seed)
    grid = TorusGrid(N=model.N, L=cfg.L)
    radius = min(3, dec.basis.M, (cfg.L - 1) // 2)
    parseval = roundtrip = 0.0
    for _ in range(cfg.probes):
        coeffs = fibering.normalize_coeffs(
            _random_coeffs(rng, model.q, model.N, radius), model.N)
        parseval = max(parseval, fibering.parseval_error(coeffs, grid, q=model.q))
        samples = fibering.transform_vector(coeffs, grid, q=model.q)
        recovered = fibering.inverse_transform(samples)
        keys = set(coeffs) | set(recovered)
        roundtrip = max(roundtrip,
                        max(abs(coeffs.get(key, 0.0) - recovered.get(key, 0.0))
                            for key in keys))
    checks.append({"name": "parseval_max_error",
                   "measured": parseval, "tolerance": tol})
    checks.append({"name": "roundtrip_max_error",
                   "measured": roundtrip, "tolerance": tol})

    reach = min(dec.report.window, 6)
    haar = 0.0
    for k in range(model.q):
        for a in itertools.product(range(-reach, reach + 1), repeat=model.N):
            haar = max(haar, fibering.haar_moment_check(dec, k, a, grid))
    checks.append({"name": "haar_moment_max_residual",
                   "measured": haar, "tolerance": tol})

    nodes = [tuple(rng.uniform(0, 2 * np.pi, size=model.N)) for _ in range(8)]
    homo = invol = 0.0
    for _ in range(10):
        A = _random_covariant(rng, model.q, model.N)
        B = _random_covariant(rng, model.q, model.N)
        AB = compose_covariant(A, B)
        for t in nodes:
            lhs = fiber_operator(AB, t)
            rhs = fiber_operator(A, t) @ fiber_operator(B, t)
            homo = max(homo, float(np.linalg.norm(lhs - rhs)))
            dag = fiber_operator(A.adjoint(), t) - fiber_operator(A, t).conj().T
            invol = max(invol, float(np.linalg.norm(dag)))
    checks.append({"name": "fiber_homomorphism_max_error",
                   "measured": homo, "tolerance": tol})
    checks.append({"name": "fiber_involution_max_error",
                   "measured": invol, "tolerance": tol})
    return checks


def _finite_group_rep(cfg: RunConfig):
    rep = finite_group_model(cfg.orders)
    if cfg.corrupt_generator:
        damaged = list(rep.generators)
        damaged[0] = damaged[0].copy()
        damaged[0][0, 0] += 0.1
        rep = type(rep)(orders=rep.orders, dim=rep.dim, generators=tuple(damaged))
    return rep


def _finite_group_checks(cfg: RunConfig) -> list[dict]:
    tol = cfg.exact_tol
    rep = _finite_group_rep(cfg)
    eye = np.eye(rep.dim)
    checks = []

    unitary = max(float(np.linalg.norm(U.conj().T @ U - eye)) for U in rep.generators)
    checks.append({"name": "generator_unitary_defect", "measured": unitary, "tolerance": tol})
    order_defect = max(
        float(np.linalg.norm(np.linalg.matrix_power(U, p) - eye))
        for U, p in zip(rep.generators, rep.orders))
    checks.append({"name": "generator_order_defect", "measured": order_defect, "tolerance": tol})
    comm = max((float(np.linalg.norm(A @ B - B @ A))
                for A, B in itertools.combinations(rep.generators, 2)), default=0.0)
    checks.append({"name": "generator_commutation", "measured": comm, "tolerance": tol})

    labels = rep.dual_labels()
    projectors = {t: bf_projector(rep, t) for t in labels}
    idem = max(float(np.linalg.norm(P @ P - P)) for P in projectors.values())
    sa = max(float(np.linalg.norm(P - P.conj().T)) for P in projectors.values())
    ortho = max((float(np.linalg.norm(projectors[t1] @ projectors[t2]))
                 for t1, t2 in itertools.combinations(labels, 2)), default=0.0)
    complete = float(np.linalg.norm(sum(projectors.values()) - eye))
    eig = 0.0
    for t, P in projectors.items():
        for j, (U, p) in enumerate(zip(rep.generators, rep.orders)):
            z = np.exp(2j * np.pi * t[j] / p)
            eig = max(eig, float(np.linalg.norm(U @ P - z * P)))
    zero_ranks = sum(1 for P in projectors.values()
                     if np.linalg.svd(P, compute_uv=False)[0] < 0.5)
    checks.append({"name": "projector_idempotent", "measured": idem, "tolerance": tol})
    checks.append({"name": "projector_selfadjoint", "measured": sa, "tolerance": tol})
    checks.append({"name": "projector_orthogonality", "measured": ortho, "tolerance": tol})
    checks.append({"name": "projector_completeness", "measured": complete, "tolerance": tol})
    checks.append({"name": "projector_eigenrelation", "measured": eig, "tolerance": tol})
    checks.append({"name": "vanishing_projectors", "measured": float(zero_ranks),
                   "tolerance": 0.5})

    rng = np.random.default_rng(cfg.seed)
    parseval = 0.0
    for _ in range(cfg.probes):
        phi = rng.normal(size=rep.dim) + 1j * rng.normal(size=rep.dim)
        phi /= np.linalg.norm(phi)
        total = sum(np.linalg.norm(P @ phi) ** 2 for P in projectors.values())
        parseval = max(parseval, abs(total - 1.0))
    checks.append({"name": "parseval_max_error", "measured": parseval, "tolerance": tol})
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    """Run the model's invariant suite and write ``report.json``."""
    if cfg.model == "finite_group":
        checks = _finite_group_checks(cfg)
    else:
        checks = _torus_model_checks(cfg)
    for c in checks:
        c["passed"] = bool(c["measured"] <= c["tolerance"])
    passed = all(c["passed"] for c in checks)
    report = {"model": cfg.model, "passed": passed, "checks": checks}
    _write_json(os.path.join(cfg.output_dir, "report.json"), report)
    for c in checks:
        status = "pass" if c["passed"] else "FAIL"
        print(f"{status}  {c['name']}: {c['measured']:.3e} (tol {c['tolerance']:.1e})")
    return 0 if passed else 1


def cmd_bands(cfg: RunConfig) -> int:
    """Write the band spectrum over the torus grid to ``bands.csv``."""
    model = cfg.build_model()
    grid = TorusGrid(N=model.N, L=cfg.L)
    bands = topology.band_spectrum(model, grid)
    cols = ["t1", "t2"][: model.N] + ["band_index", "energy"]
    lines = [",".join(cols)]
    for node in np.ndindex(grid.shape):
        t = grid.node(node)
        for r in range(bands.band_count):
            row = [_fmt(x) for x in t] + [str(r), _fmt(bands.energies[node + (r,)])]
            lines.append(",".join(row))
    _atomic_write(os.path.join(cfg.output_dir, "bands.csv"), "\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} rows")
    return 0


def cmd_chern(cfg: RunConfig) -> int:
    """Write per-band-set Chern numbers to ``chern.json``."""
    model = cfg.build_model()
    grid = TorusGrid(N=model.N, L=cfg.L)
    bands = topology.band_spectrum(model, grid)
    if cfg.band_set is not None:
        band_sets = [tuple(sorted(cfg.band_set))]
    else:
        band_sets = [(r,) for r in range(model.q)]

    rows = []
    for band_set in band_sets:
        sep, node = topology._band_separation(bands.energies, band_set)
        if sep < cfg.gap_floor:
            raise GapTooSmallError(
                f"bands {list(band_set)} separated by {sep:.3e} < {cfg.gap_floor:.1e} "
                f"at node {node} (t = {grid.node(node)})")
        if model.N != 2:
            raise ConfigError(
                f"Chern numbers need a 2-torus model, {cfg.model} fibers over T^{model.N}")
        berry = topology.chern_number(model, band_set, grid, gap_floor=cfg.gap_floor)
        rows.append({
            "band_set": list(band_set),
            "chern": berry.chern,
            "min_gap": sep if math.isfinite(sep) else None,
        })
    out = {
        "p": model.flux.numerator if model.flux else None,
        "q": model.q,
        "grid": cfg.L,
        "bands": rows,
    }
    _write_json(os.path.join(cfg.output_dir, "chern.json"), out)
    for row in rows:
        print(f"bands {row['band_set']}: chern {row['chern']}")
    return 0


def cmd_butterfly(cfg: RunConfig) -> int:
    """Write band intervals over all reduced fluxes to ``butterfly.csv``."""
    if cfg.q_max < 2:
        raise ConfigError(f"q_max must be >= 2, got {cfg.q_max}")
    rows = topology.butterfly(cfg.q_max, L=cfg.L, M=cfg.M or 6)
    lines = ["p,q,band_index,emin,emax"]
    for p, q, intervals in rows:
        for r, (lo, hi) in enumerate(intervals):
            lines.append(f"{p},{q},{r},{_fmt(lo)},{_fmt(hi)}")
    _atomic_write(os.path.join(cfg.output_dir, "butterfly.csv"), "\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} rows")
    return 0


def cmd_decompose(cfg: RunConfig) -> int:
    """Write the finite-group eigenspace decomposition to ``decomposition.json``."""
    if cfg.model != "finite_group":
        raise ConfigError("decompose requires model = finite_group")
    rep = _finite_group_rep(cfg)
    decomposition = decompose_finite(rep, tol=cfg.exact_tol, seed=cfg.seed)
    labels = [",".join(map(str, t)) for t in decomposition.labels]
    bases = {}
    for t, key in zip(decomposition.labels, labels):
        cols = decomposition.subspace_bases[t]
        bases[key] = [[[float(z.real), float(z.imag)] for z in cols[:, j]]
                      for j in range(cols.shape[1])]
    out = {
        "orders": list(rep.orders),
        "labels": labels,
        "ranks": [decomposition.rank(t) for t in decomposition.labels],
        "bases": bases,
    }
    _write_json(os.path.join(cfg.output_dir, "decomposition.json"), out)
    print(f"{len(labels)} labels, ranks {out['ranks']}")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "bands": cmd_bands,
    "chern": cmd_chern,
    "butterfly": cmd_butterfly,
    "decompose": cmd_decompose,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="blochfiber",
        description="Fibered decomposition of lattice models: bands, Chern numbers, "
                    "butterflies, finite-group decompositions.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("config", help="path to the JSON run configuration")
        p.add_argument("--out", help="override output_dir")
        p.add_argument("--seed", type=int, help="override the probe RNG seed")
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig.from_file(args.config)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlochFiberError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
