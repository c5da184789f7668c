"""adgen: audio description generation for movie clips.

Pipeline stages: shot segmentation, per-shot person tracking, tracklet-level
character identification against an exemplar-augmented cast gallery, frame
annotation (name tags / boxes), subtitle context windows, length-controlled
prompting of a vision-LLM backend, and caption-metric evaluation.
"""

__version__ = "0.1.0"
