#include <pybind11/pybind11.h>
PYBIND11_MODULE(_lane, m){ m.doc()="stub"; }
