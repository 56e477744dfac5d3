# Package initializer
