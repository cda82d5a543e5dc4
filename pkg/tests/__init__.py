# kgpart Tests Package
