"""webcurate: turn noisy web-search image manifests into curated training sets.

Subpackages and modules:
  catalog      manifests, category lists, corpus statistics
  crossfilter  remove images listed under more than one category
  dedup        exact Hamming-radius near-duplicate search and purging
  sampler      confidence-based active-learning sample selection
  annotate     task batching, majority voting, rater stats, HTTP API
  evalkit      accuracy / mAP / confusion / taxonomy / data-worth analyses
  pipeline     staged runner with content-digest caching
  cli          the ``webcurate`` command line
"""

__version__ = "0.1.0"
