"""Segment-importance video summarization as content-based recommendation.

SegNet embeds each segment from its frame features and precomputed
segment vector, a bidirectional GRU (VideoNet) turns the segment sequence
into one video context, and HighlightNet scores every segment against
that context.  Everything runs on the small numpy autodiff layer in
:mod:`hrec.autodiff`.
"""

__version__ = "0.1.0"
