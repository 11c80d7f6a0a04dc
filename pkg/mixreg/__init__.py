''' EM estimation of the coefficient prior in mixtures of linear regressions '''

__version__ = '0.1.0'
