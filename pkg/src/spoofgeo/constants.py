"""Physical and geodetic constants (SI units)."""

C = 299_792_458.0  # speed of light [m/s]

# WGS-84 ellipsoid
WGS84_A = 6_378_137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

MU_EARTH = 3.986004418e14  # [m^3/s^2]
OMEGA_EARTH = 7.2921151467e-5  # [rad/s]

GPS_L1_HZ = 1_575.42e6
GPS_L1_WAVELENGTH = C / GPS_L1_HZ
GPS_ORBIT_RADIUS = 2.656e7  # [m]
GPS_INCLINATION_DEG = 55.0
