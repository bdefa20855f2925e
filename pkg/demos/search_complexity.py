"""How much can lattice search overfit pure noise?

Compares the closed-form effective search complexity with an exhaustive
Monte Carlo estimate on null data, for a few small p.
"""

from __future__ import annotations

from pointscore.complexity import esc_closed_form, esc_monte_carlo, rbar_binary_exact, rbar_closed_form

n = 200
print(" p  closed ESC  MC ESC   ratio  MC Opt0 (SE)")
for p in range(4, 9):
    closed = esc_closed_form(p, 1, n)
    mc = esc_monte_carlo(p, 1, n, replicates=300, seed=p)
    print(f"{p:>2}  {closed.esc:>10.3f}  {mc.esc:>6.3f}  {closed.esc / mc.esc:>6.2f}  "
          f"{mc.opt0:.4f} ({mc.mc_se:.4f})")

print("\naverage rule correlation, L = 1: exact binary value vs arcsine form")
for p in (5, 10, 20, 40):
    exact = rbar_binary_exact(p, 1)
    print(f"p={p:>2}: {exact:.5f} vs {rbar_closed_form(1):.5f}")
