"""stepkdv: inverse-scattering KdV solver for step-type initial data.

Solves the Cauchy problem for u_t - 6 u u_x + u_xxx = 0 with initial data
bounded below and rapidly decaying at +infinity by assembling the Hankel
(Marchenko) operator symbol from scattering data and evaluating

    u(x, t) = -2 d^2/dx^2 log det(I + H)

through Nystrom discretization and trace-formula derivatives.
"""

__version__ = "0.1.0"
