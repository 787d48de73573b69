"""
Worked examples
===============

Three small systems whose answers are known in closed form, each landing on
a different branch of the solver.
"""

# %%
import math

import numpy as np

from tdoa_cls import pd_interval, solve_cls
from tdoa_cls.scenarios import example1, example2, example4, system_of

np.set_printoptions(precision=6, suppress=True)

# %% [markdown]
# A ring of minimisers. With ``A^T A = I`` the pencil ``I + lam D`` is
# positive definite exactly for ``-1 < lam < 1``, and at ``lam = 1`` it drops
# rank twice, so every point on a circle is optimal.

# %%
s1 = system_of(example1())
spec = pd_interval(s1)
print("interval:", spec.lambda_l, spec.lambda_u, "null dims:", spec.mult_l, spec.mult_u)

sol = solve_cls(s1)
print(sol.branch.value, sol.classification.value)
print("y =", sol.y_opt, " |y| =", np.linalg.norm(sol.y_opt), " sqrt6/12 =", math.sqrt(6) / 12)
print("f* =", sol.objective)

# any rotation of the trailing part is just as good
r = math.sqrt(3) / 12
for t in (0.0, 1.0, 2.5):
    y = np.array([r, r * math.cos(t), r * math.sin(t)])
    print(f"  angle {t:3.1f}: f = {s1.f(y):.15f}")

# %% [markdown]
# The positive-definite interval is not enough. Here the root of ``h`` on
# ``(-16, 16)`` has a negative range component, so the scan moves on to the
# indefinite interval and finds the answer at ``-16 (3 + 2 sqrt 2)``.

# %%
s2 = system_of(example2())
sol = solve_cls(s2)
print("interior root:", sol.gtrs.lam, sol.gtrs.y)
print("chosen:", sol.branch.value, sol.lambda_opt, -16 * (3 + 2 * math.sqrt(2)))
print("y =", sol.y_opt)
print("certificate:", sol.certificate.as_dict())

# %% [markdown]
# Left endpoint. ``h`` stays negative on the whole interval and ``A^T b``
# is orthogonal to the null direction, so the multiplier sits at
# ``lambda_l = -1``. The limit point is completed along ``z^-`` by a scalar
# quadratic; of its two roots exactly one gives a positive range.

# %%
s4 = system_of(example4())
sol = solve_cls(s4)
print(sol.branch.value, "lambda =", sol.lambda_opt)
print("limit point y_* =", sol.gtrs.y)
for alpha, y in sol.gtrs.candidates:
    print(f"  alpha = {alpha:+.7f} (sqrt21/4 = {math.sqrt(21) / 4:.7f})  y_1 = {y[0]:+.6f}  f = {s4.f(y):.6f}")
print("solution:", sol.y_opt, "f* =", sol.objective)
