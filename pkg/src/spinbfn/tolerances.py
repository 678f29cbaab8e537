"""Central table of numerical tolerances used across the package.

Every hermiticity / trace / positivity threshold lives here so that a
tolerance change is a one-line edit, not a hunt through the modules.
"""

# Hermiticity: ||M - M^dag||_max <= HERM_RTOL * ||M||_max
HERM_RTOL = 1e-12

# Looser per-step hermiticity bound for integrated observer states.
OBSERVER_HERM_ATOL = 1e-10

# |tr(M) - 1| for density-matrix inputs.
TRACE_ATOL = 1e-10

# |tr(rho_hat) - 1| allowed to accumulate over one integration pass.
OBSERVER_TRACE_ATOL = 1e-9

# Imaginary part of tr(observable @ state) for Hermitian inputs.
EXPECT_IMAG_ATOL = 1e-10

# Eigenvalues above -PSD_EIG_ATOL count as non-negative.
PSD_EIG_ATOL = 1e-8

# Eigenvalues below this are clamped to zero before a matrix square root.
SQRT_EIG_CLAMP = 1e-12

# Control observability margin: |Bx(0)*By'(0) - By(0)*Bx'(0)| >= this * b0^2.
PRECONDITION_REL_MARGIN = 1e-6

# Relative singular-value cutoff for the least-squares inversion.
LSTSQ_RCOND = 1e-8

# Singular values above RANK_REL_THRESHOLD * s_max count toward numerical rank.
RANK_REL_THRESHOLD = 1e-6

# Frobenius-norm ceiling for an observer state before the run is declared blown up.
BLOWUP_NORM_MAX = 1e6
