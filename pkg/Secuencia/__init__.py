# Secuencia package
