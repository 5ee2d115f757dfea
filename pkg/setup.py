from setuptools import setup, find_packages

setup(name='delone_ids',
      version='1.0',
      packages=find_packages(exclude=['tests']),
      package_data={'delone_ids': ['Utilities/config/*.yaml']},
      install_requires=['numpy', 'scipy', 'pyyaml'],
      extras_require={'test': ['pytest']},
      entry_points={'console_scripts': ['delone-ids = delone_ids.Experiment.main:main']})
