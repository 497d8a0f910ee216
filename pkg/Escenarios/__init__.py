# Escenarios package
