# Restricted Four-Body Toolkit - Tests Module
