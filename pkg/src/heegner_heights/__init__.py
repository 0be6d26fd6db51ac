"""Heights of Heegner points from the analytic side of Gross-Zagier."""

__version__ = "0.1.0"
