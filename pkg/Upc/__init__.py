# Upc package
