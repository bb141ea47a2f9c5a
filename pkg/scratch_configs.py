"""Dev scratch: find qO1/qO2/qO3 for panda7 and check task reachability."""
import numpy as np
from scipy.optimize import least_squares
from flexbeam import kinematics as K
from flexbeam import beam_model as BM

chain = K.bundled_chain("panda7")
n = chain.n_dof
lim = chain.limits
rng = np.random.default_rng(3)

q_ready = np.array([0.0, -np.pi / 4, 0.0, -3 * np.pi / 4, 0.0, np.pi / 2, np.pi / 4])


def beam_down_target(R):
    """Closest rotation with X_b = -Z0, keeping the current yaw."""
    y = R[:, 1].copy(); y[2] = 0.0; y /= np.linalg.norm(y)
    x = np.array([0.0, 0.0, -1.0])
    return np.column_stack([x, y, np.cross(x, y)])


def polish(R_target, q0):
    def resid(q):
        _, R = K.forward_kinematics(chain, q)
        return K.orientation_error(R, R_target)
    sol = least_squares(resid, q0, bounds=(lim.q_min + 0.03, lim.q_max - 0.03),
                        xtol=3e-16, ftol=3e-16, gtol=3e-16)
    return sol.x


def search(R_target, seeds, p_pull=None, w=0.15):
    best = None
    for q0 in seeds:
        def resid(q):
            p, R = K.forward_kinematics(chain, q)
            parts = [K.orientation_error(R, R_target), 0.01 * (q - q0)]
            if p_pull is not None:
                parts.append(w * (p - p_pull))
            return np.concatenate(parts)
        try:
            sol = least_squares(resid, q0, bounds=(lim.q_min + 0.05, lim.q_max - 0.05))
        except Exception:
            continue
        q = polish(R_target, sol.x)
        p, R = K.forward_kinematics(chain, q)
        err = np.linalg.norm(K.orientation_error(R, R_target))
        margin = np.minimum(q - lim.q_min, lim.q_max - q).min()
        if err > 1e-10:
            continue
        score = margin - 0.3 * max(0, np.linalg.norm(p[:2]) - 0.55)
        if best is None or score > best[0]:
            best = (score, q, p, R, margin)
    return best


def report(tag, q):
    p, R = K.forward_kinematics(chain, q)
    margin = np.minimum(q - lim.q_min, lim.q_max - q).min()
    print(f'{tag}: [{", ".join(f"{v:.6f}" for v in q)}]')
    print(f"   p = {np.round(p, 4)}  X_b = {np.round(R[:, 0], 5)}  Y_b = {np.round(R[:, 1], 5)}  margin = {margin:.3f}")
    return p, R


# qO3: beam down, polished from the ready pose keeping its natural yaw.
_, R_ready = K.forward_kinematics(chain, q_ready)
qO3 = polish(beam_down_target(R_ready), q_ready)
pO3, RO3 = report("qO3", qO3)

# qO1: beam horizontal along +X0, swing plane vertical.
qO1 = polish(K.rot_z(0.0) @ BM.orientation_rotation("O1"),
             np.array([0.4884, -0.9616, 0.9994, -2.3465, -0.8449, 2.0045, 0.0929]))
pO1, RO1 = report("qO1", qO1)

# qO2: beam up, multi-seed search pulled toward a mid-workspace position.
seeds = [np.array([0.7715, -1.5617, -0.4404, -1.1702, 0.891, 2.5613, 1.5715])]
for _ in range(40):
    s = rng.uniform(lim.q_min + 0.2, lim.q_max - 0.2)
    seeds.append(s)
best = search(BM.orientation_rotation("O2"), seeds, p_pull=np.array([0.35, -0.15, 0.6]))
if best is None:
    print("no qO2 found")
else:
    qO2 = best[1]
    pO2, RO2 = report("qO2", qO2)

# reachability of the displaced targets (position + orientation residual)
def check_target(tag, q_start, disp, R_target):
    p0, _ = K.forward_kinematics(chain, q_start)
    p_t = p0 + np.asarray(disp)

    def resid(q):
        p, R = K.forward_kinematics(chain, q)
        return np.concatenate([p - p_t, K.orientation_error(R, R_target)])
    best = None
    for q0 in [q_start] + [q_start + rng.uniform(-0.4, 0.4, n) for _ in range(15)]:
        sol = least_squares(resid, np.clip(q0, lim.q_min + 0.03, lim.q_max - 0.03),
                            bounds=(lim.q_min + 0.02, lim.q_max - 0.02))
        err = np.linalg.norm(resid(sol.x))
        if best is None or err < best[0]:
            best = (err, sol.x)
    err, q_t = best
    margin = np.minimum(q_t - lim.q_min, lim.q_max - q_t).min()
    dq_move = np.abs(q_t - q_start).max()
    print(f"{tag}: target residual {err:.2e}, margin {margin:.3f}, max joint move {dq_move:.3f} rad")


check_target("T1 (qO3 -0.2 X0)", qO3, [-0.2, 0, 0], RO3)
check_target("T2 (qO1 +0.2X -0.2Z)", qO1, [0.2, 0, -0.2], RO1)
check_target("T3 (qO2 move+reorient)", qO2, [0.2, 0, -0.2], K.rot_z(np.pi / 2) @ RO1)
