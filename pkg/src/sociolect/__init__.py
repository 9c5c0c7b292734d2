"""sociolect: metrics of how an online community's language deviates from the norm.

Type-level specificity (PMI, NPMI, tf-idf, TextRank, JSD) over distinct-user
frequency tables, sense-level specificity from induced word senses, community
behavior attributes, glossary validation, and a WSI benchmark harness, all
wired into a batch CLI.
"""

__version__ = "0.1.0"
