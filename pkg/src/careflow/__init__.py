"""Travel-aware caregiver allocation engine for home health agencies.

Clusters patient geolocations per clinical discipline, tunes the clustering
with a genetic algorithm against travel-mileage objectives, allocates
incoming patients to caregivers with working-hour feasibility checks, and
quantifies caregiver-supply what-if scenarios with significance testing.
"""

__version__ = "0.1.0"
