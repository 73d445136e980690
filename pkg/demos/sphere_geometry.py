"""Walk through the panoramic geometry: lifting a detection off a perspective
crop, comparing boxes on the sphere, and encoding them for the model."""

import math

import numpy as np

from spherevqa import sphere_geom as sg

# A camera looking 90 degrees to the left and slightly up.
view = sg.Perspective(math.radians(90), math.radians(10))

# The crop centre lands exactly on the viewing direction.
v = sg.calibrate_point(0.0, 0.0, view)
print("centre ->", np.round(np.degrees(v.to_angles()), 3))

# A detector box on the unit image plane becomes a spherical box.
box = sg.nfov_box_to_spherical([[-0.1, -0.1], [0.1, 0.1]], view, confidence=0.9)
print("box    ->", {k: round(val, 4) for k, val in box.to_json().items()})

# Boxes straddling the +-180 degree seam still overlap.
a = sg.SphericalBox(math.pi, 0.0, math.radians(20), math.radians(20))
b = sg.SphericalBox(math.pi, 0.0, math.radians(10), math.radians(20))
print("seam IoU:", round(sg.spherical_iou(a, b), 4))

# Suppression keeps the strongest of a cluster plus anything far away.
rng = np.random.default_rng(0)
cluster = [sg.SphericalBox(0.02 * i, 0.0, 0.3, 0.3, float(c)) for i, c in enumerate(rng.uniform(0.5, 1, 5))]
far = sg.SphericalBox(2.0, 0.3, 0.3, 0.3, 0.4)
kept = sg.spherical_nms(cluster + [far])
print("kept confidences:", [round(k.confidence, 3) for k in kept])

# Spatial codes: the quaternion variant and the alternatives it is compared with.
for mode in sg.SpatialMode:
    print(f"{mode.value:>11}:", np.round(sg.spatial_code(box, 0.5, mode), 4))

# Relations between objects, read the way the questions ask them.
ref = sg.SphericalBox(0.0, 0.0, 0.2, 0.2)
for other in (sg.SphericalBox(0.0, 0.7, 0.2, 0.2), sg.SphericalBox(-0.7, 0.0, 0.2, 0.2),
              sg.SphericalBox(math.pi, 0.0, 0.2, 0.2)):
    print("relation:", sg.classify_relation(ref, other).value)
