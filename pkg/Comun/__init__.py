# Comun package
