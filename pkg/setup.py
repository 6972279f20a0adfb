from setuptools import setup, find_packages

setup(
    name='ddq_helper',
    version='0.1.0',
    packages=find_packages(exclude=['tests']),
    install_requires=[
        'numpy',
        'scipy',
        'opencv-python',
        'matplotlib',
        'tqdm',
        'pyyaml',
    ],
    license='MIT License',
)
