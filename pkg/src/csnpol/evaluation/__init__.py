from .metrics import (ConfusionCounts, Stance, f1, f_avg, macro_f1, map_score_to_stance)

__all__ = ["ConfusionCounts", "Stance", "f1", "f_avg", "macro_f1", "map_score_to_stance"]
