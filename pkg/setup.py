from setuptools import setup, find_packages

with open('requirements.txt') as f:
    requirements = [line.strip() for line in f if line.strip()]

setup(
    name='convexity-atlas',
    version='0.1.0',
    description='Levi-Civita regularized restricted three-body problem: convexity certificates, flows and periodic orbits',
    packages=find_packages(include=['src', 'src.*', 'config']),
    python_requires='>=3.8',
    install_requires=requirements,
    entry_points={
        'console_scripts': [
            'convexity-atlas=src.cli:main',
        ],
    },
)
