# Root-mean-square error of the pointwise Monte Carlo estimator against the
# number of samples. The fitted log-log slope should sit near -1/2.

import math

import numpy as np

from heatnet import make_benchmark
from heatnet.mc import estimate_solution
from heatnet.sampling import RngState

p = make_benchmark("ex1")
t, x = 0.5, np.array([1.0])
exact = (t + math.exp(-t)) * math.sin(1.0)
gen = RngState(0, 3).generator()

Ms = [2**k for k in range(8, 17)]
rmse = []
for M in Ms:
    errs = [estimate_solution(p, t, x, M, M, "importance", gen).mean - exact for _ in range(50)]
    rmse.append(math.sqrt(np.mean(np.square(errs))))
    print(f"M = {M:6d}   rmse = {rmse[-1]:.3e}")

slope, _ = np.polyfit(np.log(Ms), np.log(rmse), 1)
print(f"log-log slope {slope:.3f}")
