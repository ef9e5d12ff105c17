# coding: utf-8

# # Capacity-limited edges and non-negative storage
#
# Two variants of the same triangle. In the first, every edge can carry at
# most c; a bounded damping term plus a decaying estimate of the exosystem
# keeps the commanded flows feasible after a short transient. In the second,
# storage cannot go negative; the vector field is projected on the boundary.

import numpy as np

from flowbalance import bundled, load_scenario, lyapunov, simulate

# In[1]:

sc = load_scenario(bundled("saturated_triangle"))
law = sc.law()
print("steady flow bound:", sc.exo.amplitude_bound(law.M), " capacity:", sc.plant.constraint.c)

traj = simulate(sc.plant, sc.exo, law, sc.x0, sc.sim)
saturated = np.abs(traj.commanded) >= sc.plant.constraint.c
print("saturated samples:", saturated.sum(), " last one at t =",
      traj.times[saturated.any(axis=1)].max())
print("final spread:", np.ptp(traj.x[-1]))

# In[2]:

sc = load_scenario(bundled("positive_triangle"))
traj = simulate(sc.plant, sc.exo, sc.law(), sc.x0, sc.sim)
print("min state:", traj.x.min(), " projections:", traj.projections)
print("mass added at the boundary:", traj.injected_mass[-1])
print("final state:", traj.x[-1])

# In[3]:

# Identical cubic nodes: the internal models still reject the demand, and
# the common trajectory is the scalar reference x* driven by f(x*) = -x*^3.
sc = load_scenario(bundled("cubic_triangle")).with_sim(horizon=200.0)
traj = simulate(sc.plant, sc.exo, sc.law(), sc.x0, sc.sim)
print("z tail:", lyapunov(traj).z_tail_sup, " mean state:", traj.x[-1].mean())
