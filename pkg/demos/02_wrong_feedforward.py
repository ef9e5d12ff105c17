# coding: utf-8

# # What happens with the wrong feedforward rows
#
# The rows (2/3, 1/3, 0) and (1/3, -1/3, 0) look plausible but do not
# satisfy B M = Y P_eff for this network. The internal models then settle
# on the wrong steady flows and a residual oscillation never dies out.

import numpy as np

from flowbalance import bundled, load_scenario, lyapunov, simulate
from flowbalance.synthesis import averaging_matrix

# In[1]:

good = load_scenario(bundled("triangle_example"))
bad = load_scenario(bundled("wrong_H_control"))
H_bad = bad.controller["H"]
print(np.abs(good.graph.B @ H_bad - averaging_matrix(3) @ good.P_eff).max())

# In[2]:

for sc in (good, bad):
    traj = simulate(sc.plant, sc.exo, sc.law(), sc.x0,
                    sc.with_sim(step=1e-3, horizon=200.0).sim)
    print(sc.name, "z tail:", lyapunov(traj).z_tail_sup)
