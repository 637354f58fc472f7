"""forumcohort: cohort labeling and classifier comparison over forum archives.

The package reconstructs per-user posting timelines from offline archive
dumps, labels anxiety-forum posts by whether the author later starts
posting in the ADHD forum, trains keyword baselines (Bernoulli naive
Bayes, L2 logistic regression) next to a from-scratch miniature
transformer encoder, and explains predictions by word/phrase occlusion.
A FastAPI service exposes every pipeline stage; the CLI is a thin client.
"""

__version__ = "0.1.0"
