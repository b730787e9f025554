from __future__ import annotations

SENSOR_CATALOG = [
    {
        "sensor": "TCS3200",
        "purpose": "Detects colour of rocks to identify rock type",
        "frame_field": "rgb",
        "raw_signal": "output frequency per channel (Hz)",
        "unit": "rgb 0-255",
        "calibration_section": "color",
        "faults_reported": False,
    },
    {
        "sensor": "MQ135",
        "purpose": "Detects CO2 released by microorganisms",
        "frame_field": "co2_ppm",
        "raw_signal": "load-resistor output voltage (V)",
        "unit": "ppm",
        "calibration_section": "mq135",
        "faults_reported": True,
    },
    {
        "sensor": "MQ137",
        "purpose": "Detects ammonia released by microorganisms",
        "frame_field": "ammonia_ppm",
        "raw_signal": "load-resistor output voltage (V)",
        "unit": "ppm",
        "calibration_section": "mq137",
        "faults_reported": True,
    },
    {
        "sensor": "MQ138",
        "purpose": "Detects formaldehyde levels on rocks",
        "frame_field": "formaldehyde_ppm",
        "raw_signal": "load-resistor output voltage (V)",
        "unit": "ppm",
        "calibration_section": "mq138",
        "faults_reported": True,
    },
    {
        "sensor": "MQ3",
        "purpose": "Detects alcohol levels on rock surfaces",
        "frame_field": "alcohol_detected",
        "raw_signal": "digital output level",
        "unit": "boolean",
        "calibration_section": "mq3",
        "faults_reported": False,
    },
    {
        "sensor": "HR202",
        "purpose": "Detects air humidity to analyze habitability",
        "frame_field": "humidity_pct",
        "raw_signal": "ADC counts",
        "unit": "percent",
        "calibration_section": "hr202",
        "faults_reported": False,
    },
    {
        "sensor": "YL-69",
        "purpose": "Analyzes soil moisture content",
        "frame_field": "soil_moisture_pct",
        "raw_signal": "ADC counts, high when dry",
        "unit": "percent",
        "calibration_section": "yl69",
        "faults_reported": False,
    },
    {
        "sensor": "Analog pH sensor",
        "purpose": "Detects pH levels in soil samples",
        "frame_field": "ph",
        "raw_signal": "probe reading, absent while stowed",
        "unit": "pH",
        "calibration_section": "ph",
        "faults_reported": False,
    },
    {
        "sensor": "USB microscope",
        "purpose": "Examines rock samples at microscopic level",
        "frame_field": None,
        "raw_signal": "layering flag in the rock capture",
        "unit": "boolean",
        "calibration_section": None,
        "faults_reported": False,
    },
    {
        "sensor": "1080p camera",
        "purpose": "Captures images of samples for analysis",
        "frame_field": None,
        "raw_signal": "mean colour of the rock capture and assay reaction colour",
        "unit": "rgb 0-255",
        "calibration_section": "color",
        "faults_reported": False,
    },
]


def sensor_catalog_payload() -> list[dict]:
    return [dict(row) for row in SENSOR_CATALOG]
