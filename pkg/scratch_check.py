import numpy as np
from dataclasses import replace
from flexbeam.tasks import load_task
from flexbeam.transcription import build_nlp

rng = np.random.default_rng(3)
task = load_task("src/flexbeam/data/tasks/T1.yaml")
spec = replace(task.ocp_spec(0.44), N=12)

for kind in ("arm_only", "full"):
    for rho in (1e-3, 0.0):
        sp = replace(spec, rho_jerk=rho)
        nlp = build_nlp(sp, kind)
        z = rng.normal(scale=0.3, size=nlp.layout.dim)
        # keep slacks positive-ish
        v = rng.normal(size=nlp.layout.dim)
        w_eq = rng.normal(size=nlp.n_eq)
        c0, jac = nlp.constraints_with_jac(z)
        t = 1e-6
        fd = (nlp.constraints(z + t * v) - nlp.constraints(z - t * v)) / (2 * t)
        jv = jac.matvec(v)
        e_mat = np.abs(jv - fd).max() / max(1.0, np.abs(fd).max())
        e_adj = abs(w_eq @ jv - jac.rmatvec(w_eq) @ v) / max(1.0, abs(w_eq @ jv))
        # col_sq vs explicit columns on a few random coords
        idx = rng.integers(0, nlp.layout.dim, size=8)
        cs = jac.col_sq()
        e_cs = 0.0
        for i in idx:
            e = np.zeros(nlp.layout.dim)
            e[i] = 1.0
            col = jac.matvec(e)
            e_cs = max(e_cs, abs(col @ col - cs[i]) / max(1.0, cs[i]))
        # ineq
        g0, jin = nlp.ineq.with_jac(z)
        fdg = (nlp.ineq(z + t * v) - nlp.ineq(z - t * v)) / (2 * t)
        e_gmat = np.abs(jin.matvec(v) - fdg).max() / max(1.0, np.abs(fdg).max())
        w_in = rng.random(nlp.ineq.n_rows)
        e_gadj = abs(w_in @ jin.matvec(v) - jin.rmatvec(w_in) @ v) / max(
            1.0, abs(w_in @ jin.matvec(v)))
        csw = jin.col_sq(w_in)
        e_gcs = 0.0
        for i in idx:
            e = np.zeros(nlp.layout.dim)
            e[i] = 1.0
            col = jin.matvec(e)
            e_gcs = max(e_gcs, abs(col @ (w_in * col) - csw[i]) / max(1.0, csw[i]))
        # objective derivatives
        f0 = nlp.objective(z)
        gr = nlp.objective_grad(z)
        fdo = (nlp.objective(z + t * v) - nlp.objective(z - t * v)) / (2 * t)
        e_og = abs(gr @ v - fdo) / max(1.0, abs(fdo))
        hv = nlp.objective_hess_vec(z, v)
        fdh = (nlp.objective_grad(z + t * v) - nlp.objective_grad(z - t * v)) / (2 * t)
        e_oh = np.abs(hv - fdh).max() / max(1.0, np.abs(fdh).max())
        dg = nlp.objective_diag(z)
        e_od = 0.0
        for i in idx:
            e = np.zeros(nlp.layout.dim)
            e[i] = 1.0
            e_od = max(e_od, abs(nlp.objective_hess_vec(z, e)[i] - dg[i]))
        print(f"{kind:8s} rho={rho:g}: jac {e_mat:.2e} adj {e_adj:.2e} "
              f"colsq {e_cs:.2e} | ineq {e_gmat:.2e} {e_gadj:.2e} {e_gcs:.2e} "
              f"| obj g {e_og:.2e} h {e_oh:.2e} d {e_od:.2e}  n_eq={nlp.n_eq}")
print("ok")
