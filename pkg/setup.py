from setuptools import setup, find_packages

setup(
    name='pairmeet',
    version='0.1.0',
    description='Meeting times of two independent random walks on graphs',
    packages=find_packages(exclude=['tests']),
    package_data={
        'pairmeet': [
            'config/*.yml'
    ]},
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.12',
        'networkx>=2.8',
        'pandas>=1.4',
        'pyyaml>=5.4',
    ],
    extras_require={
        'test': ['pytest>=7'],
    },
    entry_points={
        'console_scripts': [
            'pairmeet = pairmeet.cli:main',
        ]},
    zip_safe=False
)
