from setuptools import setup


with open('README.md', encoding='utf-8') as f:
    long_description = f.read()


setup(
    name='mixreg',
    version='0.1.0',
    description='nonparametric prior estimation for mixtures of linear regressions',
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.7',
        'pandas>=1.5',
        'scikit-learn>=1.0',
        'POT>=0.8'],
    extras_require={'plot': ['matplotlib>=3.3']},
    packages=[
        'mixreg',
        'mixreg.em'],
    entry_points={'console_scripts': ['mixreg=mixreg.cli:main']},
    platforms='any',
)
