import time
import numpy as np
from dataclasses import replace
from flexbeam.tasks import load_task
from flexbeam import nlp_solver as ns
from flexbeam.transcription import build_nlp

ns._DEBUG_INNER = True
task = load_task("src/flexbeam/data/tasks/T1.yaml")
spec = replace(task.ocp_spec(0.44), N=20)
nlp = build_nlp(spec, "arm_only")
z0 = ns.warm_start(spec, "arm_only")
cfg = ns.SolverConfig(max_outer=4, max_inner=120)
t0 = time.perf_counter()
z, rep = ns.solve(nlp, z0, cfg)
print(f"status {rep.status} outer {rep.n_outer} inner {rep.n_inner} "
      f"obj {rep.objective:.6e} viol {rep.violation:.3e} "
      f"stat {rep.stationarity:.3e} {time.perf_counter()-t0:.1f} s")
