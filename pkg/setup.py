from setuptools import setup, find_packages


def read_requirements():
    with open("requirements.txt", "r") as req:
        content = req.read()
        requirements = [line for line in content.split("\n") if line and not line.startswith("#")]

    return requirements


setup(
    name="malafide-filters",
    version="0.1",
    packages=find_packages(exclude=["tests", "scripts"]),
    python_requires=">=3.10",
    install_requires=read_requirements(),
    description="Adversarial linear time-invariant filters against spoofing countermeasures, on a synthetic corpus.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    entry_points={"console_scripts": ["malafide=malafide.cli:main"]},
)
