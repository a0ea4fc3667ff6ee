# Tests package for landagg
