"""Integer codes and parameter layouts shared by both integration kernels.

Every catalog object is lowered to ``(kind, params)`` where ``params`` is a
flat float64 vector.  Layouts (row-major matrices):

Static maps, embedded at an offset inside another vector::

    SMAP_SAT     [0, c]                 min(max(r, -c), c)
    SMAP_TANH    [1, b]                 b * tanh(r)
    SMAP_LINEAR  [2, b]                 b * r
    SMAP_TABLE   [3, k, xs(k), ys(k)]   linear interpolation, clamped

Plants ``(n, m, p)``::

    PLANT_LTI     A(n*n) B(n*m) C(p*n) D(p*m)
    PLANT_ICD     a, nb, b_0..b_{nb-1}, smap        (n=2, m=p=1)
    PLANT_LURE    k, d, smap                        (n=1, m=p=1)
    PLANT_EX4     smap                              (n=2, m=p=1)
    PLANT_STATIC  smap                              (n=0, m=p=1)

Auxiliary systems, driven by ``w = [u; y]``::

    AUX_LTI   A(nz*nz) B(nz*(m+p))
    AUX_EX4   smap      z' = -z - psi(z) u^2 + y

Supply rates (``q`` is the common output width of the two factors)::

    RATE_QUAD  n1, n2, q, A1 B1 C1 D1, A2 B2 C2 D2   xi = (C1 s1 + D1 w)'(C2 s2 + D2 w)
    RATE_EX4   smap                                 s' = -s - psi(s) u^2 + y; xi = y (s + u + psi(y)^2)
    RATE_IONI  n, m, nphi, delta, eps, A B C, Aphi Bphi Cphi Dphi

Input channels::

    IN_ZERO  []
    IN_CONST [a]
    IN_SIN   [A, omega, phase]
    IN_PW    [dwell, ramp, k, v_0..v_{k-1}]
    IN_EXP   [A, rate]
"""

SMAP_SAT = 0
SMAP_TANH = 1
SMAP_LINEAR = 2
SMAP_TABLE = 3

PLANT_LTI = 0
PLANT_ICD = 1
PLANT_LURE = 2
PLANT_EX4 = 3
PLANT_STATIC = 4
PLANT_HOOK = 9

AUX_NONE = 0
AUX_LTI = 1
AUX_EX4 = 2
AUX_HOOK = 9

RATE_NONE = 0
RATE_QUAD = 1
RATE_EX4 = 2
RATE_IONI = 3

IN_ZERO = 0
IN_CONST = 1
IN_SIN = 2
IN_PW = 3
IN_EXP = 4

METHOD_RK4 = 0
METHOD_EULER = 1

# loop resolution order for closed loops
ORDER_SIGMA1_FIRST = 0
ORDER_SIGMA2_FIRST = 1
ORDER_ITERATE = 2

# integrate_* return (status, first offending grid index or -1)
STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_LOOP_FAILURE = 2
