# Memoria package
