'''
Scene-text synthesis: text-region heatmaps and training data from
text-erased scene images, and synthetic text images on backgrounds.
'''

import logging

__version__ = '0.1'

logging.getLogger(__name__).addHandler(logging.NullHandler())
