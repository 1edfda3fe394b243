# setup.py
from setuptools import setup, find_packages

setup(
    name="affordance-gvf",
    version="0.1.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    include_package_data=True,
    install_requires=[
        'numpy==1.26.4',
        'scipy==1.13.1',
        'pandas==2.1.3',
        'pydantic==2.10.5',
        'click==8.1.8',
        'python-dotenv==1.0.1',
        'tqdm==4.67.1',
    ],
    extras_require={
        'test': ['pytest==8.3.4'],
    },
    entry_points={
        'console_scripts': [
            'affordance=affordance.cli:main',
        ],
    },
)
