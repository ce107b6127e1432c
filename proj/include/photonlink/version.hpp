#pragma once

#define PHOTONLINK_VERSION "0.1.0"
