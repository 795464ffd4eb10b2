# URVFL Simulator Package
