"""Best Poincare constants on crack cubes and their two scaling laws.

A field on a cube of side delta that vanishes only on a centered crack
satisfies int |u|^p <= K int |grad u|^p. The best K grows like delta^p
when the cube doubles, and for fixed delta it moves inversely with the
capacity of the crack: small cracks pin badly, so the constant blows up
exactly as capacity drains away.
"""

from pcompliance import crack_poincare

print("doubling the cube (relative crack length 0.25, p = 2):")
small = crack_poincare(1.0, 0.25, 33, 2.0)
large = crack_poincare(2.0, 0.25, 33, 2.0)
print(f"  delta = 1: K = {small.best_constant:.6f}  ({small.method})")
print(f"  delta = 2: K = {large.best_constant:.6f}")
print(f"  ratio = {large.best_constant / small.best_constant:.6f}, "
      f"delta^p predicts {2.0 ** 2}")

print("\nshrinking the crack (delta = 1, p = 2):")
print(f"  {'a':>6} {'K':>10} {'cap(a)':>10} {'K * cap':>10}")
for a in (0.125, 0.25, 0.5):
    r = crack_poincare(1.0, a, 33, 2.0, with_capacity=True,
                       capacity_resolution=8)
    product = r.best_constant * r.capacity_ref.value
    print(f"  {a:6.3f} {r.best_constant:10.5f} "
          f"{r.capacity_ref.value:10.5f} {product:10.5f}")
print("K * cap stays within a factor 2 while K itself moves by ~4x:")
print("the constant tracks inverse capacity, not crack length")
