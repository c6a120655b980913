"""Seeded verification campaigns: sample points of a family and run the identity suite."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import catalog
from .curvature import conformal_scalar_curvature, curvature_data
from .errors import BadParameterError, QchError
from .kahler import gray_g2_residual, kahler_residual, recover_kahler_structure, ricci_j_invariance_residual
from .qch import (
    QchCoefficients,
    VerificationReport,
    basis_for,
    complementary_coefficients,
    extract_coefficients,
    full_decomposition_check,
    holomorphic_sectional_curvature,
    pseudosymmetry_residual,
    constant_ratio_fingerprint,
    qch_residual,
    random_unit_vectors,
    ricci_eigen_check,
    wminus_structure_check,
)

# per-point identities and their default absolute tolerances
POINT_TOLERANCES = {
    "kahler": 1e-8,
    "g2": 1e-8,
    "fit": 1e-8,
    "qch": 1e-8,
    "complement": 1e-8,
    "ricci_eigen": 1e-7,
    "ricci_jbar": 1e-7,
    "wminus": 1e-7,
    "wminus_spectrum": 1e-7,
    "wminus_alignment": 1e-8,
    "reconstruction": 1e-8,
    "pseudosymmetry": 1e-7,
    "pseudosymmetry_3sym": 1e-5,
    "delta": 1e-7,
}
# campaign-level identities (constant-coefficient fingerprint of the 3-symmetric metric)
AGGREGATE_TOLERANCES = {
    "coefficient_spread": 1e-5,
    "b_zero": 1e-5,
    "a_kappa": 1e-4,
    "c_kappa": 1e-4,
    "tau_kappa": 1e-4,
}
IDENTITIES = tuple(POINT_TOLERANCES) + tuple(AGGREGATE_TOLERANCES)


@dataclass(frozen=True)
class FamilyRequest:
    """Picklable description of an instance, rebuilt inside worker processes.

    ``perturbation`` adds the non-Kahler conformal bump; ``distribution``
    replaces D by the span of two coordinate vectors.
    """

    name: str
    params: tuple = ()
    perturbation: float = 0.0
    distribution: Optional[tuple] = None

    @classmethod
    def create(cls, name, params=None, perturbation=0.0, distribution=None) -> "FamilyRequest":
        params = dict(params or {})
        frozen = tuple(sorted((k, tuple(v) if isinstance(v, (list, tuple)) else v) for k, v in params.items()))
        dist = None if distribution is None else tuple(int(i) for i in distribution)
        return cls(name, frozen, float(perturbation), dist)

    @property
    def params_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.params}

    def build(self) -> catalog.FamilyInstance:
        return _build(self)


@lru_cache(maxsize=32)
def _build(request: FamilyRequest) -> catalog.FamilyInstance:
    inst = catalog.make_family(request.name, request.params_dict)
    if request.perturbation:
        inst = catalog.perturbed(inst, request.perturbation)
    if request.distribution is not None:
        inst = catalog.with_coordinate_distribution(inst, request.distribution)
    return inst


def tolerances_for(instance: catalog.FamilyInstance, overrides: Optional[dict] = None, tol: Optional[float] = None) -> dict:
    """Defaults raised to the family's floor, then ``tol`` for all, then per-identity overrides."""
    out = {k: max(v, instance.tolerance_floor) for k, v in POINT_TOLERANCES.items()}
    out.update(AGGREGATE_TOLERANCES)
    if tol is not None:
        out = {k: float(tol) for k in out}
    for k, v in (overrides or {}).items():
        if k not in out:
            raise BadParameterError(f"unknown identity {k!r}")
        out[k] = float(v)
    return out


def structure_at(instance: catalog.FamilyInstance, p):
    """``(J, |nabla J|)``; the Kowalski structure is recovered from the Weyl tensor."""
    cs = instance.complex_structure
    if isinstance(cs, catalog.RecoveryDirective):
        return recover_kahler_structure(instance.metric, p, cs.orientation)
    return cs.value(p), kahler_residual(instance.metric, cs, p)


def point_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def measure_point(instance: catalog.FamilyInstance, p, rng=None, identities: Optional[Sequence[str]] = None) -> dict:
    """Every per-point residual at ``p`` together with the coefficient row.

    Raises the underlying :class:`QchError` when the point cannot be processed.
    """
    wanted = set(POINT_TOLERANCES if identities is None else identities)
    J, nabla_J = structure_at(instance, p)
    hd = instance.hermitian_at(p, J)
    cd = curvature_data(instance.metric, J, p)
    R, g = cd.riemann, cd.g
    coeffs = extract_coefficients(R, g, J, hd.p_D, rng=rng)
    basis = basis_for(hd)
    jbar = instance.jbar_at(p, hd)
    kappa_w = conformal_scalar_curvature(cd, hd.Jbar)

    res = {}
    res["kahler"] = nabla_J
    res["g2"] = gray_g2_residual(R, jbar)
    res["fit"] = coeffs.fit_residual
    res["qch"] = qch_residual(R, coeffs, basis)
    if "complement" in wanted:
        res["complement"] = qch_residual(R, complementary_coefficients(coeffs), basis_for(hd.swapped()))
    if wanted & {"ricci_eigen", "ricci_jbar"}:
        res["ricci_eigen"] = max(ricci_eigen_check(cd, hd, coeffs).values())
        res["ricci_jbar"] = ricci_j_invariance_residual(cd.ricci, jbar)
    if wanted & {"wminus", "wminus_spectrum", "wminus_alignment"}:
        wm = wminus_structure_check(cd, hd, coeffs, basis)
        res["wminus"] = wm["wminus"]
        res["wminus_spectrum"] = wm["spectrum"]
        # the simple eigenform only exists when W- is non-zero
        if abs(coeffs.c) > 1e-6:
            res["wminus_alignment"] = 1.0 - wm["alignment"] if wm["has_simple"] else 1.0
    if "reconstruction" in wanted:
        rec = full_decomposition_check(cd, hd, tol=np.inf)
        diff = np.abs(np.subtract(rec["coefficients"].as_tuple(), coeffs.as_tuple())).max()
        res["reconstruction"] = max(float(diff), rec["ricci0_shape"])
    if "pseudosymmetry" in wanted:
        res["pseudosymmetry"] = pseudosymmetry_residual(cd, basis, coeffs)
    if instance.name == "kowalski" and "pseudosymmetry_3sym" in wanted:
        res["pseudosymmetry_3sym"] = pseudosymmetry_residual(cd, basis, coeffs, factor=-kappa_w / 3.0)
    if "delta" in wanted:
        if instance.name == "calabi":
            res["delta"] = catalog.calabi_delta_check(instance, p)
        elif instance.name == "orthotoric":
            res["delta"] = catalog.orthotoric_delta_check(instance, p)

    res = {k: float(v) for k, v in res.items() if k in wanted}
    return {"coefficients": coeffs, "tau": cd.tau, "kappa_weyl": kappa_w, "residuals": res}


def point_record(instance, index: int, p, seed: int, identities=None) -> dict:
    rec = {"index": int(index), "point": [float(v) for v in p], "error": None, "residuals": {}}
    try:
        m = measure_point(instance, p, point_rng(seed, index), identities)
    except (QchError, np.linalg.LinAlgError) as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
        return rec
    rec.update(m["coefficients"].row())
    rec["tau"] = float(m["tau"])
    rec["kappa_weyl"] = float(m["kappa_weyl"])
    rec["residuals"] = m["residuals"]
    return rec


def _worker(args):
    request, index, p, seed, identities = args
    return point_record(request.build(), index, p, seed, identities)


def parallel_map(fn, items, workers: int = 1) -> list:
    """``map`` over a process pool when ``workers > 1``; results keep input order."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def aggregate_fingerprint(records: list) -> dict:
    """Constant-coefficient fingerprint over the points that ran."""
    ok = [r for r in records if r["error"] is None]
    if not ok:
        return {}
    coeffs = [QchCoefficients(r["a"], r["b"], r["c"]) for r in ok]
    return constant_ratio_fingerprint(coeffs, [r["kappa_weyl"] for r in ok], [r["tau"] for r in ok])


@dataclass
class Campaign:
    """A seeded run over ``points`` sample points of one family."""

    request: FamilyRequest
    points: int = 20
    seed: int = 0
    tol: Optional[float] = None
    tolerances: dict = field(default_factory=dict)
    identities: Optional[tuple] = None
    workers: int = 1

    def instance(self) -> catalog.FamilyInstance:
        return self.request.build()

    def sample(self) -> np.ndarray:
        return self.instance().sample(self.points, self.seed)

    def run(self) -> VerificationReport:
        inst = self.instance()
        tols = tolerances_for(inst, self.tolerances, self.tol)
        wanted = None if self.identities is None else tuple(self.identities)
        items = [(self.request, i, p, self.seed, wanted) for i, p in enumerate(self.sample())]
        if self.workers > 1:
            records = parallel_map(_worker, items, self.workers)
        else:
            records = [point_record(inst, i, p, self.seed, wanted) for _, i, p, _, _ in items]
        report = VerificationReport(inst.name, self.request.params_dict, self.seed, {})
        for rec in sorted(records, key=lambda r: r["index"]):
            report.add(rec)
        used = {k for rec in report.records for k in rec["residuals"]}
        fingerprint = aggregate_fingerprint(report.records)
        report.aggregate = {"fingerprint": fingerprint, "residuals": {}}
        if inst.name == "kowalski" and fingerprint:
            agg = {
                "coefficient_spread": fingerprint["spread"],
                "b_zero": fingerprint["b_abs"],
                "a_kappa": fingerprint["a_rel"],
                "c_kappa": fingerprint["c_rel"],
                "tau_kappa": fingerprint["tau_rel"],
            }
            if wanted is not None:
                agg = {k: v for k, v in agg.items() if k in wanted}
            report.aggregate["residuals"] = agg
            used |= set(agg)
        report.tolerances = {k: tols[k] for k in sorted(used)}
        return report


def sample_phi_rows(instance: catalog.FamilyInstance, points, seed: int, directions: int = 20) -> list:
    """Rows ``(point, t^2, phi, a, b, c, fit residual)`` for plotting ``phi`` against ``t^2``."""
    rows = []
    for i, p in enumerate(points):
        rng = point_rng(seed, i)
        J, _ = structure_at(instance, p)
        hd = instance.hermitian_at(p, J)
        cd = curvature_data(instance.metric, J, p)
        coeffs = extract_coefficients(cd.riemann, cd.g, J, hd.p_D, rng=rng)
        X = random_unit_vectors(cd.g, directions, rng)
        for x in X:
            t2 = float(x @ hd.h @ x)
            phi = holomorphic_sectional_curvature(cd.riemann, cd.g, J, x)
            fit = coeffs.a + coeffs.b * t2 + coeffs.c * t2 * t2
            rows.append({"index": i, "point": list(map(float, p)), "t2": t2, "phi": phi, **coeffs.row(), "residual:fit": abs(phi - fit)})
    rows.sort(key=lambda r: (r["index"], r["t2"]))
    return rows
