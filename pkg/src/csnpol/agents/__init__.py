from .llm import AgentConfig, Backend, Role, Throttle, llm_complete, load_prompt, parse_json_reply
from .pipeline import (Background, PipelineConfig, PipelineResult, SemanticAnnotations, SkippedReport,
                       analyze_linguistics, analyze_platform, analyze_sentiment, assess_polarization,
                       detect_stance, explore_subgroups, mine_background, run_triplet_pipeline, stance_score)
from .review import ReviewItem, ReviewMode, apply_resolutions, human_review, read_review_file

__all__ = [
    "AgentConfig", "Backend", "Role", "Throttle", "llm_complete", "load_prompt", "parse_json_reply",
    "Background", "PipelineConfig", "PipelineResult", "SemanticAnnotations", "SkippedReport",
    "analyze_linguistics", "analyze_platform", "analyze_sentiment", "assess_polarization",
    "detect_stance", "explore_subgroups", "mine_background", "run_triplet_pipeline", "stance_score",
    "ReviewItem", "ReviewMode", "apply_resolutions", "human_review", "read_review_file",
]
