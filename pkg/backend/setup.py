from setuptools import setup, find_packages

setup(
    name="regkit",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={
        'app': ['problems/*.json'],
    },
    python_requires='>=3.9',
    install_requires=[
        # Core
        'fastapi>=0.100.0,<1.0.0',
        'uvicorn==0.24.0',
        'python-dotenv==1.0.0',
        'pydantic>=2.4.0,<3.0.0',
        'pydantic-settings>=2.0.3,<3.0.0',

        # Numerics
        'numpy>=1.24.0,<3.0.0',

        # Monitoring
        'python-json-logger>=2.0.7,<3.0.0',
        'sentry-sdk[fastapi]==1.35.0',
        'prometheus-client==0.18.0',
    ],
    extras_require={
        'test': [
            'pytest>=7.4.0',
            'pytest-cov>=4.1.0',
            'hypothesis>=6.82.0',
            'httpx>=0.24.1',
        ],
    },
    entry_points={
        'console_scripts': [
            'regkit=app.cli:main',
        ],
    },
)
