"""Dev scratch: final polish and verification of named configurations."""
import numpy as np
from scipy.optimize import least_squares
from flexbeam import kinematics as K
from flexbeam import beam_model as BM

chain = K.bundled_chain("panda7")
n = chain.n_dof
lim = chain.limits
EZ = np.array([0.0, 0.0, 1.0])

qO1 = np.array([0.488476, -0.961641, 0.999562, -2.346464, -0.845102, 2.004547, 0.092761])
qO3 = np.array([0.0, -0.785398, 0.0, -2.356194, 0.0, 1.570796, 0.785398])
qO2 = np.array([2.213642, -1.459338, -1.357742, -2.762702, 1.809507, 1.545181, 2.597291])
qT3 = np.array([2.166571, -0.711826, -1.615094, -2.428032, 1.645871, 2.430326, 2.008036])

R_O1 = BM.orientation_rotation("O1")
R_O3 = BM.orientation_rotation("O3")
R_T3 = K.rot_z(np.pi / 2) @ R_O1


def polish_exact(q0, resid_fn):
    return least_squares(resid_fn, q0, bounds=(lim.q_min + 0.29, lim.q_max - 0.29),
                         xtol=1e-15, ftol=1e-15, gtol=1e-15).x


# qO1, qO3: exact canonical orientations.  qO2: exact beam-up (keep its yaw).
Rs_now = K.forward_kinematics(chain, qO2)[1]
yaw = np.arctan2(Rs_now[1, 1], Rs_now[0, 1])  # current Y_b heading, for report
qO1 = polish_exact(qO1, lambda q: K.orientation_error(K.forward_kinematics(chain, q)[1], R_O1))
qO3 = polish_exact(qO3, lambda q: K.orientation_error(K.forward_kinematics(chain, q)[1], R_O3))
qO2 = polish_exact(qO2, lambda q: K.forward_kinematics(chain, q)[1][:, 0] - EZ)

for name, q, R_ref in [("qO1", qO1, R_O1), ("qO2", qO2, None), ("qO3", qO3, R_O3)]:
    p, R = K.forward_kinematics(chain, q)
    if R_ref is None:
        err = np.abs(R[:, 0] - EZ).max()
    else:
        err = np.linalg.norm(K.orientation_error(R, R_ref))
    margin = np.minimum(q - lim.q_min, lim.q_max - q).min()
    print(f"{name}: err {err:.2e} margin {margin:.3f} p {np.round(p, 4)}")
    print(f'  [{", ".join(f"{v:.10f}" for v in q)}]')

# task reachability at the frozen configurations
tasks = [("T1", qO3, np.array([-0.2, 0.0, 0.0]), None),
         ("T2", qO1, np.array([0.2, 0.0, -0.2]), None),
         ("T3", qO2, np.array([0.2, 0.0, -0.2]), R_T3)]
for name, qs, disp, R_t in tasks:
    ps, Rs = K.forward_kinematics(chain, qs)
    R_tgt = Rs if R_t is None else R_t
    p_tgt = ps + disp

    def resid(q):
        p, R = K.forward_kinematics(chain, q)
        return np.concatenate([p - p_tgt, K.orientation_error(R, R_tgt)])

    seed = qT3 if name == "T3" else qs
    qt = least_squares(resid, seed, bounds=(lim.q_min + 0.25, lim.q_max - 0.25),
                       xtol=1e-15, ftol=1e-15).x
    err = np.linalg.norm(resid(qt), np.inf)
    move = np.abs(qt - qs).max()
    margin = np.minimum(qt - lim.q_min, lim.q_max - qt).min()
    print(f"{name}: residual {err:.2e} move {move:.3f} margin {margin:.3f}")
