""" Setup
"""
from setuptools import setup, find_packages
from codecs import open
from os import path

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

exec(open('gazeemb/version.py').read())
setup(
    name='gazeemb',
    version=__version__,
    description='Gaze embeddings for zero-shot image classification',
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        # How mature is this project? Common values are
        #   3 - Alpha
        #   4 - Beta
        #   5 - Production/Stable
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Education',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Software Development :: Libraries :: Python Modules',
    ],

    # Note that this is a string of words separated by whitespace, not a list.
    keywords='eye tracking gaze fixation zero-shot learning structured joint embedding',
    packages=find_packages(exclude=['data', 'tests']),
    install_requires=[
        'torch >= 1.8', 'numpy', 'pandas', 'scikit-learn >= 1.0', 'scipy >= 1.7', 'nltk', 'joblib', 'tqdm',
        'Pillow'],
    extras_require={'test': ['pytest']},
    python_requires='>=3.8',
)
