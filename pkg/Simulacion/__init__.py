# Simulacion package
