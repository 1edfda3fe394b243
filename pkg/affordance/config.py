"""
Configuration settings for the application.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()

class Config:
    """Base configuration"""
    # Application settings
    ENV = os.environ.get('AFFORDANCE_ENV', 'development')

    # Oracle settings
    ENUMERATION_NODE_LIMIT = int(os.environ.get('ENUMERATION_NODE_LIMIT', 2_000_000))
    ENUMERATION_MAX_HORIZON = int(os.environ.get('ENUMERATION_MAX_HORIZON', 100_000))

    # Surprise tracking
    UDE_WINDOW = int(os.environ.get('UDE_WINDOW', 100))
    UDE_EPSILON = float(os.environ.get('UDE_EPSILON', 1e-8))

    # Logging settings
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_DIR = os.environ.get('LOG_DIR', 'logs')
