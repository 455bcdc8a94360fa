# Makes src.api a package
