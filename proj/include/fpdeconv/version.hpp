#pragma once

#define FPD_VERSION_MAJOR 0
#define FPD_VERSION_MINOR 1
#define FPD_VERSION_PATCH 0
#define FPD_VERSION_STRING "0.1.0"
