from setuptools import setup
setup(name='textsynth',
      version='0.1',
      description='Scene-text synthesis from text-erased images',
      packages=['textsynth'],
      python_requires='>=3.8',
      install_requires=[
          'numpy',
          'scipy',
          'matplotlib',
          'opencv-python-headless',
          'Pillow',
          'scikit-learn',
          'PyYAML',
          'tqdm',
      ],
      extras_require={'test': ['pytest', 'hypothesis']},
      entry_points={'console_scripts': ['textsynth=textsynth.cli:main']},
      )
