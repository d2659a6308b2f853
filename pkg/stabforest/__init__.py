"""
stabforest: seed-stable random forest feature importance through randomized leave-one-subject-out trials
"""

__version__ = '0.1.0'
