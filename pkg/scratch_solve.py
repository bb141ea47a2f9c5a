import time
import numpy as np
from dataclasses import replace
from flexbeam.tasks import load_task
from flexbeam import nlp_solver as ns
from flexbeam.transcription import build_nlp

task = load_task("src/flexbeam/data/tasks/T1.yaml")
spec = replace(task.ocp_spec(0.44), N=20)

t0 = time.perf_counter()
cfg = ns.SolverConfig(trace_path="/tmp/trace_full.csv")
sol, rep = ns.solve_ocp(spec, config=cfg)
dt = time.perf_counter() - t0

print(f"status {rep.status} outer {rep.n_outer} inner {rep.n_inner} "
      f"obj {rep.objective:.6e} viol {rep.violation:.3e} "
      f"stat {rep.stationarity:.3e} {dt:.1f} s")
