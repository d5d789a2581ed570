"""safemap: road-safety mapping from overhead imagery.

Grid accident records into labeled map cells, train a region-guided
attention classifier on the resulting tiles with a from-scratch reverse-mode
tensor engine, adapt it across imagery domains by aligning class-conditional
covariance statistics, and export evaluation reports, class activation maps,
and safety-map rasters.
"""

__version__ = "0.1.0"
