# SPDX-License-Identifier: GPL-2.0+
#!/usr/bin/env python3
from setuptools import setup

def readme():
    with open('README.md') as f:
        return f.read()

setup(
    name='mathesis',
    version='1.0',
    description='Energy guided theorem proving over typed hypergraphs',
    long_description=readme(),
    classifiers=[
        'Development Status :: 4 - Beta',
        'Operating System :: POSIX :: Linux',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Classifier: License :: OSI Approved :: GNU General Public License (GPL)',
        'Programming Language :: Python :: 3.8',
    ],
    keywords="theorem-proving hypergraph mcts ppo groebner",
    license='GPL',
    packages=['mathesis'],
    entry_points={
        'console_scripts': [
            'mathesis=mathesis.main:main',
        ],
    },
    python_requires=">=3.8",
    install_requires=[
        'numpy>=1.20',
    ],
    extras_require={
        'test': ['pytest>=6'],
    },
    include_package_data=True,
    zip_safe=False)
