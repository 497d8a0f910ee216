# Nodo package
