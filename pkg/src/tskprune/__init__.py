"""tskprune - TSK fuzzy regression training with MBGD-RDA and rule pruning."""

__version__ = "0.1.0"
